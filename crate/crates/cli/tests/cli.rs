use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

fn data(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(rel)
}

fn phonosim(args: &[&str], stdin: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_phonosim"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(stdin.as_bytes())
        .unwrap();
    child.wait_with_output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(phonosim(&[], "").status.code(), Some(1));
    assert_eq!(phonosim(&["pca", "--bogus"], "").status.code(), Some(1));
    assert_eq!(phonosim(&["--help"], "").status.code(), Some(0));
}

#[test]
fn registry_validate_lists_flags() {
    let o = phonosim(
        &["registry", "validate", p(&data("languages.csv"))],
        "",
    );
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("hi\tIndo-Iranian\t14.71\tlow\tHindi"));
    assert!(out.contains("tt\tTurkic\t30.66\t-\tTatar"));
    assert!(out.ends_with("22 languages, 11 low-resource (< 15 h)\n"));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(
        &bad,
        "code,name,family,branch,hours\nxx,X,F,,1\nxx,Y,F,,2\n",
    )
    .unwrap();
    let o = phonosim(&["registry", "validate", p(&bad)], "");
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("xx"));
}

#[test]
fn ipa_tokenize_normalizes() {
    let o = phonosim(&["ipa", "tokenize"], "ˈt͡sa.sʲi\n");
    assert_eq!(stdout(&o), "t͡s a ʃ i\n");
    let o = phonosim(&["ipa", "tokenize", "--raw"], "ˈt͡sa\n");
    assert_eq!(stdout(&o), "ˈt͡s a\n");
    let o = phonosim(&["ipa", "tokenize"], "\u{0303}a\n");
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 1"));
}

#[test]
fn g2p_modes() {
    let rules = data("toy/rules/ka.tsv");
    let o = phonosim(&["g2p", "--rules", p(&rules)], "Chala, kasi!\n");
    assert_eq!(stdout(&o), "t͡ʃ a l a k a ʃ i\n");
    let o = phonosim(&["g2p", "--rules", p(&rules)], "xa\n");
    assert_eq!(o.status.code(), Some(2));
    let o = phonosim(&["g2p", "--rules", p(&rules), "--mode", "skip"], "xa\n");
    assert_eq!(stdout(&o), "a\n");
    let o = phonosim(
        &["g2p", "--rules", p(&rules), "--mode", "passthrough"],
        "xa\n",
    );
    assert_eq!(stdout(&o), "x a\n");
    let o = phonosim(&["g2p", "--rules", p(&rules), "--mode", "maybe"], "");
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn corpus_path_subcommands_chain() {
    let dir = tempfile::tempdir().unwrap();
    let out = |name: &str| dir.path().join(name);
    let o = phonosim(
        &[
            "sim",
            "matrix",
            "--corpus-dir",
            p(&data("toy/corpus")),
            "--rules-dir",
            p(&data("toy/rules")),
            "--policy",
            p(&data("toy/policy.txt")),
            "--registry",
            p(&data("toy/registry.csv")),
            "--out",
            p(&out("sim.csv")),
            "--distributions",
            p(&out("dist.csv")),
            "--cohesion",
            p(&out("coh.json")),
        ],
        "",
    );
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let golden = |n: &str| std::fs::read_to_string(data("toy/golden").join(n)).unwrap();
    let read = |n: &str| std::fs::read_to_string(out(n)).unwrap();
    assert_eq!(read("sim.csv"), golden("similarity.csv"));
    assert_eq!(read("dist.csv"), golden("distributions.csv"));
    assert_eq!(read("coh.json"), golden("family_similarity.json"));

    let o = phonosim(
        &[
            "pca",
            "--in",
            p(&out("sim.csv")),
            "--out",
            p(&out("xy.csv")),
            "--registry",
            p(&data("toy/registry.csv")),
        ],
        "",
    );
    assert_eq!(o.status.code(), Some(0));
    // the matrix went through 12-decimal CSV, so compare numerically
    let (got, want) = (read("xy.csv"), golden("coords.csv"));
    assert_eq!(got.lines().count(), want.lines().count());
    for (a, b) in got.lines().zip(want.lines()).skip(1) {
        for (x, y) in a.split(',').zip(b.split(',')) {
            match (x.parse::<f64>(), y.parse::<f64>()) {
                (Ok(x), Ok(y)) => assert!((x - y).abs() < 1e-9, "{a} vs {b}"),
                _ => assert_eq!(x, y),
            }
        }
    }

    for ext in ["json", "svg"] {
        let target = out(&format!("c.{ext}"));
        let o = phonosim(
            &[
                "contours",
                "--coords",
                p(&out("xy.csv")),
                "--registry",
                p(&data("toy/registry.csv")),
                "--level",
                "0.1",
                "--relative",
                "--resolution",
                "256",
                "--out",
                p(&target),
            ],
            "",
        );
        assert_eq!(o.status.code(), Some(0));
        let text = read(&format!("c.{ext}"));
        match ext {
            "json" => {
                let v: serde_json::Value = serde_json::from_str(&text).unwrap();
                let fams: Vec<&str> = v
                    .as_array()
                    .unwrap()
                    .iter()
                    .map(|f| f["family"].as_str().unwrap())
                    .collect();
                assert_eq!(fams, ["Kesh", "Moru"]);
                assert!(v
                    .as_array()
                    .unwrap()
                    .iter()
                    .all(|f| f["polylines"][0]["closed"] == true));
            }
            _ => assert!(text.starts_with("<svg") && text.matches("<polyline").count() == 2),
        }
    }

    let o = phonosim(
        &[
            "select",
            "--target",
            "ka",
            "--k",
            "3",
            "--registry",
            p(&data("toy/registry.csv")),
            "--matrix",
            p(&out("sim.csv")),
            "--out",
            p(&out("sel.json")),
            "--manifest",
            p(&out("m.tsv")),
            "--corpus-dir",
            p(&data("toy/corpus")),
            "--rules-dir",
            p(&data("toy/rules")),
            "--policy",
            p(&data("toy/policy.txt")),
        ],
        "",
    );
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert_eq!(read("sel.json"), golden("selection.json"));
    assert_eq!(read("m.tsv"), golden("manifest.tsv"));
}

#[test]
fn select_needs_matrix_for_corpus_sim() {
    let o = phonosim(
        &[
            "select",
            "--target",
            "ka",
            "--registry",
            p(&data("toy/registry.csv")),
        ],
        "",
    );
    assert_eq!(o.status.code(), Some(2));
    let o = phonosim(
        &[
            "select",
            "--target",
            "ka",
            "--strategy",
            "family",
            "--registry",
            p(&data("toy/registry.csv")),
        ],
        "",
    );
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("\"code\": \"kb\""));
}

#[test]
fn typology_projection() {
    let dir = tempfile::tempdir().unwrap();
    let feats = dir.path().join("f.csv");
    std::fs::write(
        &feats,
        "lang,f1,f2,f3\nka,1,0,1\nkb,1,?,1\nma,0,1,0\nmb,0,1,?\n",
    )
    .unwrap();
    let out = dir.path().join("xy.csv");
    let args = |impute: &'static str| {
        vec![
            "typology".to_string(),
            "--features".into(),
            p(&feats).into(),
            "--impute".into(),
            impute.into(),
            "--registry".into(),
            p(&data("toy/registry.csv")).into(),
            "--out".into(),
            p(&out).into(),
        ]
    };
    let run = |a: Vec<String>| phonosim(&a.iter().map(String::as_str).collect::<Vec<_>>(), "");
    assert_eq!(run(args("none")).status.code(), Some(2));
    assert_eq!(run(args("column-mode")).status.code(), Some(0));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("id,x,y,ev1,ev2,family\n"));
    assert!(text.contains(",Kesh\n") && text.contains(",Moru\n"));
}

#[test]
fn per_report() {
    let dir = tempfile::tempdir().unwrap();
    let (r, h) = (dir.path().join("ref.txt"), dir.path().join("hyp.txt"));
    std::fs::write(&r, "a b c d\nt͡ʃ a\n").unwrap();
    std::fs::write(&h, "a x c d\nk a\n").unwrap();
    let o = phonosim(&["per", "--ref", p(&r), "--hyp", p(&h)], "");
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["substitutions"], 2);
    assert_eq!(v["reference_length"], 6);
    assert!((v["per_percent"].as_f64().unwrap() - 100.0 * 2.0 / 6.0).abs() < 1e-11);
    let o = phonosim(&["per", "--ref", p(&r), "--hyp", p(&h), "--macro"], "");
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["per_percent"].as_f64().unwrap(), 37.5);
    std::fs::write(&h, "a\n").unwrap();
    assert_eq!(
        phonosim(&["per", "--ref", p(&r), "--hyp", p(&h)], "")
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn pipeline_flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = phonosim(
        &[
            "pipeline",
            "--config",
            p(&data("toy/pipeline.toml")),
            "--out-dir",
            p(&out),
            "--k",
            "1",
        ],
        "",
    );
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert!(stdout(&o).starts_with("target ka: sources kb\n"));
    let o = phonosim(
        &[
            "pipeline",
            "--config",
            p(&data("toy/pipeline.toml")),
            "--out-dir",
            p(&out),
            "--k",
            "0",
        ],
        "",
    );
    assert_eq!(o.status.code(), Some(2));
    let o = phonosim(&["pipeline", "--out-dir", p(&out)], "");
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing required setting"));
}
