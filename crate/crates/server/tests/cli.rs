mod common;

use common::{run_cli, Fixture};
use serde_json::Value;

fn json(s: &str) -> Value {
    serde_json::from_str(s).unwrap_or_else(|e| panic!("bad JSON ({e}): {s}"))
}

const STEER: &[&str] = &["steer", "--prompt", "I love dogs", "--seed", "0", "--n", "3", "--max-new-tokens", "12"];

fn steer(fx: &Fixture, extra: &[&str]) -> Value {
    let mut args = STEER.to_vec();
    args.extend(extra);
    let (code, out, err) = fx.cli(&args);
    assert_eq!(code, 0, "{err}");
    json(&out)
}

#[test]
fn exit_codes() {
    let fx = Fixture::new(1);
    let (code, _, err) = fx.cli(&["steer", "--prompt", "I love dogs", "--layer", "99"]);
    assert_eq!(code, 2);
    assert!(err.contains("0..=3"), "{err}");

    let (code, _, err) = fx.cli(&["generate", "--prompt", "x", "--frobnicate"]);
    assert_eq!(code, 2);
    assert!(err.contains("Usage"), "{err}");

    let (code, _, _) = fx.cli(&["generate", "--prompt", "x", "--top-p", "0"]);
    assert_eq!(code, 2);

    let (code, _, err) = run_cli(&["--model".into(), "/nonexistent/model.aawf".into(), "generate".into(), "--prompt".into(), "x".into()], &[]);
    assert_eq!(code, 1, "{err}");

    let (code, _, err) = run_cli(&["generate".into(), "--prompt".into(), "x".into()], &[]);
    assert_eq!(code, 2, "{err}");
}

#[test]
fn neutral_steering_is_identical_through_cli_json() {
    let fx = Fixture::new(2);
    for extra in [
        &["--coef", "0"][..],
        &["--plus", "Love", "--minus", "Love", "--coef", "10"],
        &["--coef", "10", "--dim-cutoff", "0"],
    ] {
        let r = steer(&fx, extra);
        assert_eq!(r["identical"], true, "{extra:?}");
        assert_eq!(r["steered"], r["baseline"], "{extra:?}");
        assert_eq!(r["scores"]["steered"], r["scores"]["baseline"], "{extra:?}");
    }
    let full = steer(&fx, &["--coef", "10", "--layer", "1"]);
    let cut = steer(&fx, &["--coef", "10", "--layer", "1", "--dim-cutoff", "32"]);
    assert_eq!(full["steered"], cut["steered"]);
    assert_eq!(full["baseline"], cut["baseline"]);
    assert_eq!(full["identical"], false);
}

#[test]
fn steer_scores_use_requested_keywords() {
    let fx = Fixture::new(12);
    let r = steer(&fx, &["--coef", "0", "--keywords", "the,a,and,of"]);
    assert_eq!(r["scores"]["keywords"], serde_json::json!(["the", "a", "and", "of"]));
    let side = &r["scores"]["baseline"];
    let counts: Vec<u64> = side["counts"].as_array().unwrap().iter().map(|c| c.as_u64().unwrap()).collect();
    let spans = side["spans"].as_array().unwrap();
    assert_eq!(counts.len(), 3);
    for ((count, spans), completion) in counts.iter().zip(spans).zip(r["baseline"].as_array().unwrap()) {
        let spans = spans.as_array().unwrap();
        assert_eq!(spans.len() as u64, *count);
        let chars: Vec<char> = completion["text"].as_str().unwrap().chars().collect();
        for span in spans {
            let (a, b) = (span[0].as_u64().unwrap() as usize, span[1].as_u64().unwrap() as usize);
            let word: String = chars[a..b].iter().collect::<String>().to_lowercase();
            assert!(["the", "a", "and", "of"].contains(&word.as_str()), "{word}");
        }
    }
    let default = steer(&fx, &["--coef", "0"]);
    assert_eq!(default["scores"]["keywords"][0], "wedding");
}

#[test]
fn unseeded_runs_report_the_seed_they_used() {
    let fx = Fixture::new(3);
    let (code, out, _) = fx.cli(&["generate", "--prompt", "Hello there", "--max-new-tokens", "5", "--n", "2"]);
    assert_eq!(code, 0);
    let r = json(&out);
    let seed = r["params"]["seed"].as_u64().unwrap();
    assert_eq!(r["completions"][1]["seed"].as_u64().unwrap(), seed + 1);
    let (_, again, _) = fx.cli(&["generate", "--prompt", "Hello there", "--max-new-tokens", "5", "--n", "2", "--seed", &seed.to_string()]);
    assert_eq!(json(&again), r);
}

#[test]
fn config_file_then_env_then_flags() {
    let fx = Fixture::new(4);
    let mut cfg = fx.config();
    cfg.defaults.max_new_tokens = 6;
    cfg.defaults.top_p = 1.0;
    let path = fx.dir.path().join("config.json");
    std::fs::write(&path, serde_json::to_string(&cfg).unwrap()).unwrap();
    let base = ["--config".to_string(), path.display().to_string()];
    let gen = |extra: &[&str], env: &[(&str, &str)]| {
        let mut args: Vec<String> = base.to_vec();
        args.extend(["generate", "--prompt", "The", "--seed", "5"].map(String::from));
        args.extend(extra.iter().map(|s| s.to_string()));
        let (code, out, err) = run_cli(&args, env);
        assert_eq!(code, 0, "{err}");
        json(&out)["params"].clone()
    };
    assert_eq!(gen(&[], &[])["max_new_tokens"], 6);
    assert_eq!(gen(&[], &[])["top_p"], 1.0);
    assert_eq!(gen(&[], &[("ACTADD_MAX_NEW_TOKENS", "4")])["max_new_tokens"], 4);
    assert_eq!(gen(&["--max-new-tokens", "2"], &[("ACTADD_MAX_NEW_TOKENS", "4")])["max_new_tokens"], 2);

    std::fs::write(&path, r#"{"max_concurent": 2}"#).unwrap();
    let (code, _, err) = run_cli(&[base[0].clone(), base[1].clone(), "serve".into()], &[]);
    assert_eq!(code, 2);
    assert!(err.contains("max_concurent"), "{err}");
}

#[test]
fn exported_vector_round_trips_into_evaluations() {
    let fx = Fixture::new(5);
    let out = fx.dir.path().join("wedding.aawf");
    let out_s = out.display().to_string();
    let (code, info, err) = fx.cli(&["export-vector", "--layer", "2", "--coef", "4", "--out", &out_s]);
    assert_eq!(code, 0, "{err}");
    let info = json(&info);
    assert_eq!(info["spec"]["layer"], 2);
    assert_eq!(info["norms"][0], 0.0);

    let prompts = common::root().join("fixtures/kl_prompts.txt").display().to_string();
    let (c1, by_spec, _) = fx.cli(&["eval-kl", "--prompts", &prompts, "--layer", "2", "--coef", "4"]);
    let (c2, by_file, _) = fx.cli(&["eval-kl", "--prompts", &prompts, "--vector", &out_s]);
    assert_eq!((c1, c2), (0, 0));
    assert_eq!(by_spec, by_file);
    let r = json(&by_spec);
    assert_eq!(r["prompts"].as_array().unwrap().len(), 20);
    assert!(r["prompts"].as_array().unwrap().iter().all(|p| p["kl_a"].as_f64().unwrap() >= 0.0));

    let (code, _, err) = fx.cli(&["eval-kl", "--prompt", "Hi", "--vector", "/nonexistent.aawf"]);
    assert_eq!(code, 2, "{err}");
}

#[test]
fn evaluation_subcommands() {
    let fx = Fixture::new(6);
    let corpus = fx.small_corpus(6).display().to_string();
    let (code, out, err) = fx.cli(&["eval-perplexity", "--corpus", &corpus, "--bin-width", "0.005", "--min-count", "2", "--layer", "1", "--coef", "3"]);
    assert_eq!(code, 0, "{err}");
    let r = json(&out);
    assert_eq!(r["condition"], "actadd");
    assert_eq!(r["bins"][0]["documents"], 6);
    assert!(r["bins"][0]["perplexity_ratio"].as_f64().unwrap() > 0.0);

    let (code, out, _) = fx.cli(&["eval-prompting", "--corpus", &corpus, "--related-threshold", "0.01", "--min-count", "1"]);
    assert_eq!(code, 0);
    let r = json(&out);
    assert_eq!(r["condition"], "prompting");
    assert_eq!(r["prefix"], " weddings");
    assert_eq!(r["bins"].as_array().unwrap().len(), 2);

    let (code, out, _) = fx.cli(&["eval-shift", "--corpus", &corpus, "--min-instances", "3", "--coef", "0"]);
    assert_eq!(code, 0);
    let r = json(&out);
    assert!(r["tokens"].as_array().unwrap().iter().all(|t| t["mean_delta"] == 0.0));

    let knowledge = fx.small_knowledge(20).display().to_string();
    let (code, out, err) = fx.cli(&["eval-pk", "--knowledge", &knowledge, "--ks", "1,10,50257"]);
    assert_eq!(code, 0, "{err}");
    let r = json(&out);
    assert_eq!(r["items"], 20);
    assert_eq!(r["unsteered"][2], 1.0);

    let (code, _, err) = fx.cli(&["eval-perplexity", "--corpus", "/nonexistent/dir"]);
    assert_eq!(code, 2, "{err}");
}

#[test]
fn sweeps() {
    let fx = Fixture::new(7);
    let (code, out, err) = fx.cli(&["sweep-layers", "--prompt", "I went up to my friend and said", "--n", "4", "--coef", "5", "--max-new-tokens", "6", "--seed", "0"]);
    assert_eq!(code, 0, "{err}");
    let r = json(&out);
    assert_eq!(r["steered"].as_array().unwrap().len(), 4);
    assert!(r["baseline"]["layer"].is_null());

    let (code, out, err) = fx.cli(&["sweep-partial", "--prompt", "I went up to my friend and said", "--n", "3", "--coef", "4", "--layer", "2", "--max-new-tokens", "6", "--seed", "0"]);
    assert_eq!(code, 0, "{err}");
    let r = json(&out);
    let fractions: Vec<f64> = r["steered"].as_array().unwrap().iter().map(|s| s["dim_fraction"].as_f64().unwrap()).collect();
    assert_eq!(fractions, [0.0, 0.25, 0.5, 0.75, 1.0]);
    assert_eq!(r["steered"][0]["counts"], r["baseline"]["counts"]);
}

#[test]
fn convert_check_detects_corruption() {
    let fx = Fixture::new(8);
    let model = fx.model.display().to_string();
    let (code, out, err) = run_cli(&["convert-check".into(), model.clone()], &[]);
    assert_eq!(code, 0, "{err}");
    let r = json(&out);
    assert_eq!(r["kind"], "model");
    assert_eq!(r["config"]["n_layers"], 4);

    let mut bytes = std::fs::read(&fx.model).unwrap();
    let n = bytes.len();
    bytes[n - 3] ^= 0x10;
    let bad = fx.dir.path().join("bad.aawf");
    std::fs::write(&bad, bytes).unwrap();
    let (code, _, err) = run_cli(&["convert-check".into(), bad.display().to_string()], &[]);
    assert_eq!(code, 1);
    assert!(err.contains("lnf"), "{err}");
}

#[test]
fn premium_with_stub_only() {
    let (code, out, err) = run_cli(
        &["bench-premium", "--no-model", "--stub-ms", "10,2", "--reps", "3", "--seeds", "2"].map(String::from),
        &[],
    );
    assert_eq!(code, 0, "{err}");
    let r = json(&out);
    let p = r["entries"][0]["premium"].as_f64().unwrap();
    assert!((p - 0.2).abs() < 0.05, "{p}");
    let (code, _, _) = run_cli(&["bench-premium", "--no-model", "--warmup", "1"].map(String::from), &[]);
    assert_eq!(code, 2);
}
