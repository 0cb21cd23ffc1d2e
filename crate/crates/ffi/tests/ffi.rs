use std::ffi::{CStr, CString};
use std::path::Path;
use std::ptr;

use advscen_ffi::*;

fn last_error() -> String {
    let p = advscen_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

struct World {
    env: *mut AdvscenEnv,
    ego: *mut AdvscenEgo,
    traffic: *mut AdvscenTraffic,
}

impl World {
    fn new(traffic: *mut AdvscenTraffic) -> Self {
        let mut env = ptr::null_mut();
        let mut ego = ptr::null_mut();
        unsafe {
            assert_eq!(advscen_env_new(ptr::null(), &mut env), AdvscenStatus::Ok);
            assert_eq!(advscen_ego_gap_new(&mut ego), AdvscenStatus::Ok);
        }
        Self { env, ego, traffic }
    }

    fn naturalistic() -> Self {
        let mut traffic = ptr::null_mut();
        assert_eq!(unsafe { advscen_traffic_naturalistic_new(&mut traffic) }, AdvscenStatus::Ok);
        Self::new(traffic)
    }

    fn evaluate(&self, episodes: u64, seed: u64) -> AdvscenEvalStats {
        let mut s = AdvscenEvalStats::default();
        let st = unsafe { advscen_evaluate(self.env, self.traffic, self.ego, episodes, seed, &mut s) };
        assert_eq!(st, AdvscenStatus::Ok);
        s
    }
}

impl Drop for World {
    fn drop(&mut self) {
        unsafe {
            advscen_env_free(self.env);
            advscen_ego_free(self.ego);
            advscen_traffic_free(self.traffic);
        }
    }
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(advscen_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn evaluation_is_deterministic_and_consistent() {
    let w = World::naturalistic();
    let a = w.evaluate(20, 3);
    assert_eq!(a, w.evaluate(20, 3));
    assert_eq!(a.episodes, 20);
    assert!((a.success_rate + a.crash_rate + a.timeout_rate - 1.0).abs() < 1e-12);

    let mut eps = vec![AdvscenEpisode { seed: 0, outcome: AdvscenOutcome::Timeout, steps: 0, ego_return: 0.0, adv_return: 0.0 }; 20];
    let st = unsafe { advscen_episodes(w.env, w.traffic, w.ego, 20, 3, eps.as_mut_ptr(), eps.len()) };
    assert_eq!(st, AdvscenStatus::Ok);
    let success = eps.iter().filter(|e| e.outcome == AdvscenOutcome::Success).count() as f64 / 20.0;
    assert_eq!(success, a.success_rate);
    let mean_ego = eps.iter().map(|e| e.ego_return).sum::<f64>() / 20.0;
    assert!((mean_ego - a.mean_ego_return).abs() < 1e-9);
    assert!(eps.iter().all(|e| e.steps > 0));
}

#[test]
fn errors_set_status_and_message() {
    let w = World::naturalistic();
    let mut s = AdvscenEvalStats::default();
    unsafe {
        assert_eq!(advscen_evaluate(ptr::null(), w.traffic, w.ego, 5, 0, &mut s), AdvscenStatus::NullPointer);
        assert!(last_error().contains("env"));
        assert_eq!(advscen_evaluate(w.env, w.traffic, w.ego, 0, 0, &mut s), AdvscenStatus::InvalidArgument);
        let mut one = [AdvscenEpisode { seed: 0, outcome: AdvscenOutcome::Timeout, steps: 0, ego_return: 0.0, adv_return: 0.0 }];
        assert_eq!(advscen_episodes(w.env, w.traffic, w.ego, 2, 0, one.as_mut_ptr(), 1), AdvscenStatus::InvalidArgument);
        assert!(last_error().contains("capacity"));

        // a success clears the message
        assert_eq!(advscen_evaluate(w.env, w.traffic, w.ego, 1, 0, &mut s), AdvscenStatus::Ok);
        assert!(advscen_last_error().is_null());

        let mut env = ptr::null_mut();
        let bad = CString::new(r#"{"scenario": {"dt": -1}}"#).unwrap();
        assert_eq!(advscen_env_new(bad.as_ptr(), &mut env), AdvscenStatus::Config);
        let unknown = CString::new(r#"{"wheels": 4}"#).unwrap();
        assert_eq!(advscen_env_new(unknown.as_ptr(), &mut env), AdvscenStatus::Config);
        assert!(env.is_null());
        assert_eq!(advscen_env_new(ptr::null(), ptr::null_mut()), AdvscenStatus::NullPointer);

        let mut ego = ptr::null_mut();
        let missing = CString::new("/nonexistent/q_network.json").unwrap();
        assert_eq!(advscen_ego_dqn_load(missing.as_ptr(), &mut ego), AdvscenStatus::Io);
        let mut traffic = ptr::null_mut();
        assert_eq!(advscen_traffic_member_load(missing.as_ptr(), &mut traffic), AdvscenStatus::Io);
        assert_eq!(advscen_traffic_member_load(ptr::null(), &mut traffic), AdvscenStatus::NullPointer);

        // freeing NULL is a no-op
        advscen_env_free(ptr::null_mut());
        advscen_ego_free(ptr::null_mut());
        advscen_traffic_free(ptr::null_mut());
    }
}

#[test]
fn env_json_overrides_defaults() {
    let json = CString::new(r#"{"reward": {"beta": 2.0}}"#).unwrap();
    let mut env = ptr::null_mut();
    unsafe {
        assert_eq!(advscen_env_new(json.as_ptr(), &mut env), AdvscenStatus::Ok);
        advscen_env_free(env);
    }
}

#[test]
fn trained_member_matches_cli_evaluation() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("run.json");
    let cfg = serde_json::json!({
        "base_seed": 5,
        "ego": {"kind": "gap_acceptance"},
        "hyper": {"ensemble_size": 1, "max_episodes": 3, "warmup": 0, "batch_size": 16, "buffer_size": 256},
        "analysis": {"evaluation_episodes": 6}
    });
    std::fs::write(&config, serde_json::to_vec(&cfg).unwrap()).unwrap();
    let out = tmp.path().join("out");
    let common = |cmd: &str| {
        vec![
            "advscen".to_owned(),
            cmd.to_owned(),
            "--config".to_owned(),
            config.display().to_string(),
            "--output-dir".to_owned(),
            out.display().to_string(),
            "--jobs".to_owned(),
            "1".to_owned(),
        ]
    };
    assert_eq!(advscen::cli::main_with(common("train-adversaries")), 0);
    let mut args = common("evaluate");
    args.extend(["--adversary".to_owned(), "member-000".to_owned()]);
    assert_eq!(advscen::cli::main_with(args), 0);
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("eval/member-000/summary.json")).unwrap()).unwrap();

    let dir = CString::new(out.join("ensemble/member-000").display().to_string()).unwrap();
    let mut traffic = ptr::null_mut();
    assert_eq!(unsafe { advscen_traffic_member_load(dir.as_ptr(), &mut traffic) }, AdvscenStatus::Ok);
    let w = World::new(traffic);
    let s = w.evaluate(6, 5);
    assert_eq!(s.crash_rate, summary["mean_crash_rate"].as_f64().unwrap());
    assert_eq!(s.success_rate, summary["mean_success_rate"].as_f64().unwrap());
}

#[test]
fn header_is_current_and_compiles() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = std::fs::read_to_string(dir.join("include/advscen.h")).unwrap();
    let src = std::fs::read_to_string(dir.join("src/lib.rs")).unwrap();
    for line in src.lines().filter(|l| l.starts_with("pub unsafe extern \"C\" fn") || l.starts_with("pub extern \"C\" fn")) {
        let name = line.split("fn ").nth(1).unwrap().split('(').next().unwrap();
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let probe = std::process::Command::new(&cc).arg("--version").output();
    if probe.is_err() {
        eprintln!("no C compiler; skipping compile check");
        return;
    }
    let tmp = tempfile::tempdir().unwrap();
    let c = tmp.path().join("use.c");
    std::fs::write(
        &c,
        "#include \"advscen.h\"\nint main(void) { AdvscenEnv *e = 0; return advscen_env_new(0, &e) == ADVSCEN_STATUS_OK ? 0 : 1; }\n",
    )
    .unwrap();
    let status = std::process::Command::new(&cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(dir.join("include"))
        .arg(&c)
        .status()
        .unwrap();
    assert!(status.success());
}
