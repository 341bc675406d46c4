use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::tempdir;

fn lingsub(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_lingsub"));
    cmd.args(args).env_remove("LINGSUB_THREADS").env_remove("SOURCE_DATE_EPOCH");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn run_ok(args: &[&str]) -> String {
    let out = lingsub(args, &[]);
    assert!(
        out.status.success(),
        "{args:?} failed with {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    lingsub(args, &[]).status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Every file under `root`, keyed by relative path.
fn snapshot(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for entry in fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const SMALL: [&str; 12] = [
    "--d",
    "32",
    "--lang-dim",
    "4",
    "--languages",
    "en,de,fr,ru",
    "--vocab-size",
    "50",
    "--n-per-language",
    "100",
    "--noise-sigma",
    "0",
];

#[test]
fn synth_gen_is_byte_identical_per_seed() {
    let dir = tempdir().unwrap();
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    for (out, seed) in [(&a, "7"), (&b, "7"), (&c, "8")] {
        let mut args = vec!["synth-gen", "--seed", seed, "--output", s(out), "--noise-sigma", "0.1"];
        args.extend_from_slice(&SMALL[..10]);
        run_ok(&args);
    }
    let (sa, sb, sc) = (snapshot(&a), snapshot(&b), snapshot(&c));
    assert!(sa.len() >= 15, "{:?}", sa.keys().collect::<Vec<_>>());
    assert_eq!(sa, sb);
    let matrix = PathBuf::from("samples.reprset/matrix.f32");
    assert_ne!(sa[&matrix], sc[&matrix]);
}

#[test]
fn exact_pipeline_reaches_perfect_accuracy_and_composes() {
    let dir = tempdir().unwrap();
    let root = dir.path();
    let synth = root.join("synth");
    let mut args = vec!["synth-gen", "--seed", "3", "--output", s(&synth)];
    args.extend_from_slice(&SMALL);
    run_ok(&args);
    let before = snapshot(&synth);

    let samples = synth.join("samples.reprset");
    let fit = root.join("fit");
    run_ok(&["inlp-fit", "--input", s(&samples), "--output", s(&fit), "--seed", "3", "--iterations", "20"]);
    let proj = fit.join("projection.proj");
    let fit_report = read_json(&fit.join("report.json"));
    assert!(fit_report["guarantee_residual"].as_f64().unwrap() <= 1e-4);
    let meta = read_json(&proj.join("meta.json"));
    assert_eq!(meta["manifest"]["subcommand"], "inlp-fit");
    assert_eq!(meta["manifest"]["seeds"]["seed"], 3);

    let lv = root.join("lv");
    run_ok(&["langvec", "--input", s(&samples), "--output", s(&lv)]);

    let tr = root.join("tr");
    run_ok(&[
        "translate",
        "--input",
        s(&synth.join("vocab.vocab")),
        "--lexicon",
        s(&synth.join("lexicon.tsv")),
        "--langvec",
        s(&lv.join("language_vectors.langvec")),
        "--topk",
        "10",
        "--all-pairs",
        "--output",
        s(&tr),
    ]);
    let heat = fs::read_to_string(tr.join("heatmap.csv")).unwrap();
    let lines: Vec<&str> = heat.lines().collect();
    assert_eq!(lines.len(), 5);
    for (i, line) in lines[1..].iter().enumerate() {
        let cells: Vec<&str> = line.split(',').skip(1).collect();
        for (j, cell) in cells.iter().enumerate() {
            assert_eq!(*cell, if i == j { "NA" } else { "1" }, "{heat}");
        }
    }

    let ev = root.join("ev");
    let text = run_ok(&[
        "eval",
        "--input",
        s(&tr.join("rankings.tsv")),
        "--lexicon",
        s(&synth.join("lexicon.tsv")),
        "--ks",
        "1,10",
        "--output",
        s(&ev),
    ]);
    let report = read_json(&ev.join("report.json"));
    assert_eq!(report["kind"], "translation_eval");
    assert_eq!(report["overall"]["acc_at"]["1"], 1.0);
    assert_eq!(report["overall"]["n"], 150);
    assert!(text.contains("acc@1"));

    // Projected sets feed every subcommand that reads representation sets.
    let pr = root.join("pr");
    run_ok(&["project", "--input", s(&samples), "--projection", s(&proj), "--space", "nullspace", "--output", s(&pr)]);
    let projected = pr.join("projected.reprset");
    run_ok(&["langvec", "--input", s(&projected), "--output", s(&root.join("lv2"))]);
    run_ok(&["plotdata", "--input", s(&projected), "--output", s(&root.join("pd2"))]);

    let ce = root.join("ce");
    run_ok(&["cluster-eval", "--input", s(&samples), "--projection", s(&proj), "--output", s(&ce)]);
    let spaces = &read_json(&ce.join("report.json"))["spaces"];
    for name in ["original", "nullspace", "rowspace"] {
        let v = spaces[name]["v"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&v), "{name}: {v}");
    }
    assert!(spaces["rowspace"]["v"].as_f64() > spaces["nullspace"]["v"].as_f64());

    let pd = root.join("pd");
    run_ok(&["plotdata", "--input", s(&samples), "--projection", s(&proj), "--space", "rowspace", "--raw", "--output", s(&pd)]);
    let plot = fs::read_to_string(pd.join("plot.csv")).unwrap();
    assert_eq!(plot.lines().next(), Some("x,y,language,token"));
    assert_eq!(plot.lines().count(), 401);
    let raw = fs::read_to_string(pd.join("vectors.csv")).unwrap();
    assert_eq!(raw.lines().next().unwrap().split(',').count(), 2 + 32);

    let rendered = run_ok(&[
        "report",
        "--input",
        s(&fit.join("report.json")),
        s(&ce.join("report.json")),
        s(&ev.join("report.json")),
        "--output",
        s(&root.join("rep")),
    ]);
    assert!(rendered.contains("nullspace rank") && rendered.contains("homogeneity") && rendered.contains("acc@10"));
    assert_eq!(fs::read_to_string(root.join("rep/report.txt")).unwrap(), rendered);

    for out in [&fit, &lv, &tr, &ev, &pr, &ce, &pd] {
        assert!(out.join("manifest.json").exists(), "{}", out.display());
    }
    assert_eq!(snapshot(&synth), before, "inputs were modified");
}

#[test]
fn intervention_pipeline_reduces_english_share() {
    let dir = tempdir().unwrap();
    let root = dir.path();
    let synth = root.join("synth");
    run_ok(&[
        "synth-gen",
        "--seed",
        "11",
        "--output",
        s(&synth),
        "--languages",
        "en,de,fr,ru,fi",
        "--vocab-size",
        "100",
        "--n-per-language",
        "200",
        "--noise-sigma",
        "0.05",
        "--lang-norm",
        "2",
        "--lex-norm",
        "1",
        "--concept-size",
        "10",
        "--concept-cohesion",
        "0.85",
    ]);
    let (emb, rep) = (root.join("emb"), root.join("rep"));
    run_ok(&["inlp-fit", "--input", s(&synth.join("samples.reprset")), "--output", s(&emb), "--seed", "1"]);
    run_ok(&["inlp-fit", "--input", s(&synth.join("hidden.reprset")), "--output", s(&rep), "--seed", "2"]);

    let out = root.join("iv");
    let hidden = synth.join("hidden.reprset");
    let vocab = synth.join("vocab.vocab");
    let english = synth.join("english.txt");
    let crossling = synth.join("crossling.vec");
    let embed_proj = emb.join("projection.proj");
    let repr_proj = rep.join("projection.proj");
    run_ok(&[
        "intervene",
        "--input",
        s(&hidden),
        "--vocab",
        s(&vocab),
        "--embed-projection",
        s(&embed_proj),
        "--repr-projection",
        s(&repr_proj),
        "--english-words",
        s(&english),
        "--crossling",
        s(&crossling),
        "--languages",
        "en",
        "--ks",
        "1,5,10",
        "--dump",
        "--output",
        s(&out),
    ]);
    let report = read_json(&out.join("report.json"));
    assert_eq!(report["instances"], 200);
    let english_at = |variant: &str, k: &str| report["variants"][variant]["english"][k].as_f64().unwrap();
    for k in ["1", "5", "10"] {
        assert!(english_at("none", k) > english_at("inlp_both", k), "k={k}: {report}");
    }
    let coherence = |variant: &str| report["variants"][variant]["coherence"]["10"]["mean"].as_f64().unwrap();
    assert!((coherence("none") - coherence("inlp_both")).abs() <= 0.1, "{report}");

    let csv = fs::read_to_string(out.join("english.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("variant,k,english_proportion"));
    assert_eq!(csv.lines().count(), 1 + 4 * 3);
    assert!(out.join("coherence.csv").exists());
    for v in ["none", "inlp_embed", "inlp_repr", "inlp_both"] {
        assert!(out.join(format!("predictions_{v}.tsv")).exists());
    }

    // A projected variant without its projection is a usage error.
    let missing = root.join("iv2");
    let args = [
        "intervene",
        "--input",
        s(&hidden),
        "--vocab",
        s(&vocab),
        "--english-words",
        s(&english),
        "--variant",
        "both",
        "--output",
        s(&missing),
    ];
    assert_eq!(code(&args), 1);
}

#[test]
fn thread_count_does_not_change_outputs() {
    let dir = tempdir().unwrap();
    let root = dir.path();
    let synth = root.join("synth");
    let mut args = vec!["synth-gen", "--seed", "5", "--output", s(&synth), "--noise-sigma", "0.5"];
    args.extend_from_slice(&SMALL[..10]);
    run_ok(&args);
    let mut outputs = Vec::new();
    for threads in ["1", "4"] {
        let out = root.join(format!("t{threads}"));
        let status = lingsub(
            &[
                "translate",
                "--input",
                s(&synth.join("vocab.vocab")),
                "--lexicon",
                s(&synth.join("lexicon.tsv")),
                "--method",
                "baseline",
                "--output",
                s(&out),
            ],
            &[("LINGSUB_THREADS", threads)],
        );
        assert!(status.status.success());
        outputs.push(fs::read(out.join("rankings.tsv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn exit_codes() {
    let dir = tempdir().unwrap();
    let root = dir.path();
    assert_eq!(code(&[]), 1);
    assert_eq!(code(&["--help"]), 0);
    assert_eq!(code(&["--version"]), 0);
    assert_eq!(code(&["frobnicate"]), 1);
    assert_eq!(code(&["eval", "--bogus"]), 1);
    assert_eq!(code(&["intervene", "--variant", "sideways"]), 1);

    let out = s(&root.join("out")).to_string();
    assert_eq!(code(&["langvec", "--input", s(&root.join("nope.reprset")), "--output", &out]), 2);

    let bad = root.join("bad.reprset");
    fs::create_dir_all(&bad).unwrap();
    fs::write(bad.join("meta.json"), "not json").unwrap();
    assert_eq!(code(&["langvec", "--input", s(&bad), "--output", &out]), 1);
    assert_eq!(code(&["langvec", "--input", s(&bad), "--output", s(&bad.join("inside"))]), 1);
    assert!(!bad.join("inside").exists());

    let synth = root.join("synth");
    let mut args = vec!["synth-gen", "--output", s(&synth)];
    args.extend_from_slice(&SMALL[..10]);
    run_ok(&args);
    let status = lingsub(
        &["langvec", "--input", s(&synth.join("samples.reprset")), "--output", &out],
        &[("LINGSUB_THREADS", "many")],
    );
    assert_eq!(status.status.code(), Some(1));
    assert_eq!(code(&["langvec", "--input", s(&synth.join("samples.reprset")), "--languages", "xx", "--output", &out]), 1);
    assert_eq!(code(&["synth-gen", "--lang-dim", "40", "--d", "32", "--output", &out]), 1);
}

#[test]
fn confusion_and_size_correlation() {
    let dir = tempdir().unwrap();
    let root = dir.path();
    let dump = root.join("langpred.tsv");
    let rows = [
        ("s1", "en", "en;de"),
        ("s2", "en", "en;fr"),
        ("s3", "en", "de;en"),
        ("s4", "de", "de;en"),
        ("s5", "de", "de;fr"),
        ("s6", "fr", "en;fr"),
        ("s7", "xx", "xx;en"),
    ];
    let mut text = String::from("#top_k=2\n");
    for (src, truth, preds) in rows {
        let cands: Vec<String> = preds.split(';').zip([2.0, 1.0]).map(|(t, sc)| format!("{t}:{sc}")).collect();
        text.push_str(&format!("{src}\t{truth}\t{truth}\ttemplate\t{}\n", cands.join(";")));
    }
    fs::write(&dump, text).unwrap();
    let sizes = root.join("sizes.tsv");
    fs::write(&sizes, "de\t300\nen\t200\nfr\t100\n").unwrap();

    let out = root.join("cm");
    run_ok(&["confusion", "--input", s(&dump), "--sizes", s(&sizes), "--drop", "xx", "--output", s(&out)]);
    let csv = fs::read_to_string(out.join("confusion.csv")).unwrap();
    let want = "true,de,en,fr\nde,2,0,0\nen,1,2,0\nfr,0,1,0\n";
    assert_eq!(csv, want);
    let report = read_json(&out.join("report.json"));
    assert!((report["spearman"].as_f64().unwrap() - 1.0).abs() <= 1e-12);
    let en = &report["languages"][1];
    assert_eq!(en["language"], "en");
    assert!((en["top_k"]["1"].as_f64().unwrap() - 2.0 / 3.0).abs() <= 1e-12);
    assert_eq!(en["top_k"]["5"], 1.0);
    assert_eq!(report["languages"][2]["top_k"]["1"], 0.0);
    assert_eq!(report["languages"][2]["top_k"]["5"], 1.0);

    let out = root.join("cm_sqrt");
    run_ok(&["confusion", "--input", s(&dump), "--sqrt", "--drop", "xx", "--output", s(&out)]);
    let csv = fs::read_to_string(out.join("confusion.csv")).unwrap();
    assert!(csv.contains(&format!("de,{},0,0", 2f64.sqrt())), "{csv}");
    assert!(read_json(&out.join("report.json"))["spearman"].is_null());
}

#[test]
fn eval_reports_share_ranked_first_and_compares_methods() {
    let dir = tempdir().unwrap();
    let root = dir.path();
    let lexicon = root.join("lex.tsv");
    let mut lex = String::from("#source_language=en\n");
    let mut dump = String::from("#top_k=3\n");
    let mut base = String::from("#top_k=3\n");
    for i in 0..1000 {
        lex.push_str(&format!("w{i}\tt{i}\tde\tN\n"));
        let first = if i < 449 { format!("t{i}") } else { format!("x{i}") };
        let second = if i < 449 { format!("x{i}") } else { format!("t{i}") };
        dump.push_str(&format!("w{i}\tde\tt{i}\ttemplate\t{first}:2;{second}:1;y{i}:0\n"));
        base.push_str(&format!("w{i}\tde\tt{i}\tbaseline\tx{i}:2;y{i}:1;t{i}:0\n"));
    }
    fs::write(&lexicon, lex).unwrap();
    let (ranks, baseline) = (root.join("template.tsv"), root.join("baseline.tsv"));
    fs::write(&ranks, dump).unwrap();
    fs::write(&baseline, base).unwrap();

    let ev = root.join("ev");
    run_ok(&[
        "eval",
        "--input",
        s(&ranks),
        "--lexicon",
        s(&lexicon),
        "--baseline",
        s(&baseline),
        "--ks",
        "1,2",
        "--output",
        s(&ev),
    ]);
    let overall = &read_json(&ev.join("report.json"))["overall"];
    assert_eq!(overall["acc_at"]["1"], 0.449);
    assert_eq!(overall["acc_at"]["2"], 1.0);
    assert_eq!(overall["hard_win"], 1.0);
    assert!((overall["avg_rank"].as_f64().unwrap() - 1.551).abs() <= 1e-12);

    let evb = root.join("evb");
    run_ok(&["eval", "--input", s(&baseline), "--lexicon", s(&lexicon), "--ks", "1,2", "--output", s(&evb)]);
    let table = run_ok(&[
        "report",
        "--input",
        s(&ev.join("report.json")),
        s(&evb.join("report.json")),
        "--names",
        "template,baseline",
    ]);
    let lines: Vec<&str> = table.lines().collect();
    assert!(lines[0].starts_with("method") && lines[0].contains("acc@2"));
    assert!(lines[2].starts_with("template") && lines[2].contains("0.4490"), "{table}");
    assert!(lines[3].starts_with("baseline") && lines[3].contains("0.0000"), "{table}");
    assert_eq!(code(&["report", "--input", s(&ev.join("report.json")), "--names", "a,b"]), 1);
}
