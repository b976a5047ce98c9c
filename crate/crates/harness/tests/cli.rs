use std::path::PathBuf;
use std::process::Command;
use std::time::Duration;

use msclab::metrics::Stage;
use msclab::pipeline::{frame_sentence, run_pipeline, transmit_frame, FrameShape, PipelineConfig};
use msclab::semantic::{CandidateProvider, CorrectionRequest, ExternalProvider};
use msclab::{LinearCode, SimRng};
use msclab_harness::config::{CodeSpec, ProviderSpec};
use msclab_harness::{run_experiment, ExperimentConfig};
use rand::SeedableRng;

const BIN: &str = env!("CARGO_BIN_EXE_msclab");

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn configs(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn scratch(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("cli");
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn serve_command() -> Vec<String> {
    vec![
        BIN.to_string(),
        "serve".into(),
        "--provider".into(),
        "dictionary".into(),
        "--corpus".into(),
        data("corpus500.txt").display().to_string(),
    ]
}

#[test]
fn shipped_configs_validate() {
    for name in ["quick.json", "msc_dictionary.json", "msc_ngram.json", "sharq.json", "long_code.json"] {
        let out = Command::new(BIN).arg("validate").arg(configs(name)).output().unwrap();
        assert!(out.status.success(), "{name}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn validate_reports_problems() {
    let path = scratch("bad.json");
    std::fs::write(
        &path,
        r#"{"code":{"family":"file","n":32,"k":16},"q":32,"snr_db":[],"num_sentences":1,"seed":0,
        "corpus":"nowhere.txt","provider":{"kind":"identity"},"output":"o.csv"}"#,
    )
    .unwrap();
    let out = Command::new(BIN).arg("validate").arg(&path).env("RUST_BACKTRACE", "0").output().unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("snr_db") && err.contains("corpus") && err.contains("matrix"), "{err}");
}

#[test]
fn run_writes_csv_and_sidecar() {
    let path = scratch("run.json");
    std::fs::write(
        &path,
        format!(
            r#"{{"code":{{"family":"random","n":32,"k":16,"seed":1,"osd_order":1}},"q":32,"snr_db":[2],"num_sentences":12,"seed":4,
            "corpus":{:?},"provider":{{"kind":"dictionary"}},"output":"run_out/r.csv"}}"#,
            data("corpus500.txt")
        ),
    )
    .unwrap();
    let mut outputs = Vec::new();
    for threads in ["1", "3"] {
        let out = Command::new(BIN).args(["run", "--threads", threads]).arg(&path).output().unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        outputs.push(std::fs::read(scratch("run_out/r.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    let text = String::from_utf8(outputs.remove(0)).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(scratch("run_out/r.json").is_file());
}

#[test]
fn analyze_prints_curves() {
    let out = Command::new(BIN).args(["analyze", "na", "--n", "64", "--snr-min", "-1", "--snr-max", "1", "--snr-step", "1"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(text.starts_with("n,k,snr_db,capacity,dispersion,na_bound"));

    let out = Command::new(BIN).args(["analyze", "bler", "--table", "64x32", "--pe", "0.01"]).output().unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    let row: Vec<f64> = text.lines().nth(1).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(row[0], 16.0);
    assert!(row[3] < row[4] && row[4] < row[5], "exact < approx < msc: {row:?}");
}

#[test]
fn gen_ldpc_matches_fixture() {
    let out = Command::new(BIN).args(["gen-ldpc", "--n", "96", "--wc", "3", "--wr", "6", "--seed", "7"]).output().unwrap();
    assert_eq!(String::from_utf8(out.stdout).unwrap(), std::fs::read_to_string(data("ldpc_96_3_6.alist")).unwrap());
}

#[test]
fn corrupt_emits_pairs() {
    let out = Command::new(BIN)
        .args(["corrupt", "--snr", "1", "--n", "64", "--k", "32", "--q", "16", "--corpus"])
        .arg(data("corpus500.txt"))
        .output()
        .unwrap();
    assert!(out.status.success());
    let lines: Vec<serde_json::Value> = String::from_utf8(out.stdout).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 500);
    let garbled = lines.iter().filter(|v| v["clean"] != v["corrupted"]).count();
    assert!(garbled > 100, "{garbled}");
}

#[test]
fn bench_runs() {
    let out = Command::new(BIN).args(["bench", "--frames", "50", "--max-order", "1"]).output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().lines().any(|l| l.starts_with("osd,1,50,")));
}

#[test]
fn bridge_talks_to_the_native_server() {
    let p = ExternalProvider::spawn(&serve_command(), Duration::from_secs(30)).unwrap();
    assert_eq!(p.name(), "dictionary");
    let fixed = p.correct(&CorrectionRequest::correct("A child in a gray suit is runnXng on a bench.", 2)).unwrap();
    assert_eq!(fixed, "A child in a gray suit is running on a bench.");
    let text = "A child in a gray suit is <mask>nning on a bench.";
    let cands = p.fill(&CorrectionRequest::fill(text, vec![13], 2, 20)).unwrap();
    assert_eq!(cands.len(), 20);
    assert!(cands.iter().all(|c| !c.contains("<mask>")));
    assert_eq!(cands[0], "A child in a gray suit is running on a bench.");
}

#[test]
fn dead_provider_falls_back() {
    // handshakes, then exits: every request fails and the receiver keeps MSC/SEC text
    let cmd = vec!["sh".to_string(), "-c".into(), r#"echo '{"ready":true,"provider":"flaky"}'"#.into()];
    let p = ExternalProvider::spawn(&cmd, Duration::from_secs(5)).unwrap();
    let code = LinearCode::random(32, 16, 1).unwrap();
    let frame = frame_sentence("A dog runs on the grass.", 32, 16).unwrap();
    let obs = transmit_frame(&code, &frame, 1.0, &mut SimRng::seed_from_u64(3)).unwrap();
    let cfg = PipelineConfig { osd_order: 1, ..Default::default() };
    let res = run_pipeline(&code, &p, FrameShape::of(&frame), &obs, &cfg).unwrap();
    assert!(res.sec_fallback.is_some());
    assert_eq!(res.sec, res.msc);
    if !res.error_set.is_empty() {
        assert!(res.sld_diagnostics.fill_error.is_some());
        assert_eq!(res.sld, res.sec);
    }
}

#[test]
fn experiment_through_the_bridge() {
    let cfg = ExperimentConfig {
        code: CodeSpec::random(32, 16, 1).with_order(1),
        q: 32,
        snr_db: vec![2.0],
        num_sentences: 50,
        seed: 11,
        corpus: data("corpus500.txt"),
        provider: ProviderSpec::External { command: serve_command(), timeout_s: 30 },
        t_sec: 0.001,
        t_harq: 0.1,
        num_candidates: 20,
        harq: None,
        lc: None,
        output: scratch("bridge.csv"),
        record_timing: false,
    };
    let mut native = cfg.clone();
    native.provider = ProviderSpec::Dictionary { corpus: None };
    let (exp, out) = run_experiment(cfg, 2).unwrap();
    assert_eq!(exp.provider_name(), "dictionary");
    let (_, reference) = run_experiment(native, 2).unwrap();
    for stage in [Stage::Msc, Stage::MscSec, Stage::MscSld] {
        let a = out.row(2.0, stage).unwrap();
        let b = reference.row(2.0, stage).unwrap();
        assert_eq!((a.bler, a.bleu, a.rouge_l), (b.bler, b.bleu, b.rouge_l), "{stage}");
        assert_eq!(a.frames, 50);
    }
}
