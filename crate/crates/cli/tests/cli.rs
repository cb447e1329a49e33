use std::path::PathBuf;
use std::process::{Command, Output};

fn subdiff(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_subdiff")).args(args).output().expect("binary runs")
}

fn write_config(name: &str, text: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("subdiff-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn ml_csv() {
    let cfg = write_config("ml.toml", "[ml]\nalphas = [0.5]\nxs = [1.0]\n");
    let o = subdiff(&["ml", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.starts_with("alpha,x,value,branch\n5e-1,1e0,4.27583576155"), "{text}");
}

#[test]
fn converge_is_reproducible_and_written_to_file() {
    let cfg = write_config("conv.toml", "alpha = 0.8\nm = [0, 2]\nj = [5, 6]\n");
    let out = cfg.with_file_name("conv.csv");
    let o = subdiff(&["converge", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let first = std::fs::read_to_string(&out).unwrap();
    assert!(first.starts_with("J,m,error,rate\n5,0,"), "{first}");
    assert_eq!(first.lines().count(), 5);
    let again = subdiff(&["converge", "--config", cfg.to_str().unwrap(), "--threads", "1"]);
    assert_eq!(stdout(&again), first);
}

#[test]
fn json_output() {
    let cfg = write_config("cond.toml", "[cond]\nalphas = [0.8]\nm_max = 4\n");
    let o = subdiff(&["cond-report", "--config", cfg.to_str().unwrap(), "--format", "json"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("\"columns\"") && text.contains("\"condition\""), "{text}");
}

#[test]
fn config_errors_exit_2() {
    let cfg = write_config("bad.toml", "preset = \"case1_scalar\"\nalpha = 2.0\n");
    let o = subdiff(&["weights", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("line 2") && err.contains("alpha"), "{err}");

    let o = subdiff(&["weights", "--config", "/nonexistent/cfg.toml"]);
    assert_eq!(o.status.code(), Some(2));

    let cfg = write_config("syntax.toml", "alpha = \n");
    assert_eq!(subdiff(&["weights", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn unreachable_accuracy_exits_3() {
    // 64 steps cannot support the node count this tolerance needs
    let cfg = write_config("fast.toml", "[fast]\nj = 6\neps = 1e-13\n");
    let o = subdiff(&["fast-compare", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn weights_for_cn_family_leave_omega_empty() {
    let cfg = write_config("cn.toml", "family = \"cn-linear\"\n[weights]\nn = 2\n");
    let o = subdiff(&["weights", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.lines().nth(1).unwrap().starts_with("0,,"), "{text}");
}

#[test]
fn shipped_configs_parse() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut count = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        subdiff_core::ExperimentConfig::load(&path)
            .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        count += 1;
    }
    assert!(count >= 5);
}
