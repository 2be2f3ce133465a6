use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use omniforge::mesh::write_ply_ascii;
use omniforge::pipeline::{load_config, Manifest, MANIFEST_FILE};
use omniforge::procedural::room;

const CONFIG: &str = "\
# small room run
cues: [depth_zbuffer, segmentation_semantic]
seed: 5
sampling.n_points: 40
sampling.min_views: 1
sampling.max_views: 2
sampling.camera_height_range: [0.3, 2.2]
sampling.resolution: 32
";

struct Fixture {
    dir: tempfile::TempDir,
}

impl Fixture {
    fn new(config: &str) -> Self {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("room.ply"), write_ply_ascii(&room())).unwrap();
        std::fs::write(dir.path().join("run.cfg"), config).unwrap();
        Fixture { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn command(&self, extra: &[&str]) -> Command {
        self.command_with("room.ply", "run.cfg", extra)
    }

    fn command_with(&self, mesh: &str, config: &str, extra: &[&str]) -> Command {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_annotate"));
        cmd.env_remove("OMNIFORGE_JOBS")
            .env("RUST_LOG", "warn")
            .arg("--mesh")
            .arg(self.path(mesh))
            .arg("--config")
            .arg(self.path(config))
            .arg("--out")
            .arg(self.path("out"))
            .args(extra);
        cmd
    }

    fn run(&self, extra: &[&str]) -> Output {
        self.command(extra).output().unwrap()
    }
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn manifest(dir: &Path) -> Manifest {
    Manifest::read(&dir.join(MANIFEST_FILE)).unwrap()
}

#[test]
fn full_run_writes_a_valid_dataset() {
    let f = Fixture::new(CONFIG);
    let o = f.run(&[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let m = manifest(&f.path("out"));
    assert_eq!(m.space_id, "room");
    assert_eq!(m.cues, ["depth_zbuffer", "segmentation_semantic"]);
    assert!(!m.views.is_empty());
    m.validate(&f.path("out")).unwrap();
}

#[test]
fn flags_override_the_config_file() {
    let f = Fixture::new(CONFIG);
    let o = f.run(&[
        "--cues",
        "normals,mask_valid",
        "--seed",
        "9",
        "--jobs",
        "4",
        "--print-config",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let printed = String::from_utf8(o.stdout).unwrap();
    let c = load_config(&printed).unwrap();
    assert_eq!(c.seed, 9);
    assert_eq!(c.jobs, 4);
    assert_eq!(c.sampling.n_points, 40);
    assert_eq!(
        printed.lines().find(|l| l.starts_with("cues:")),
        Some("cues: [normals, mask_valid]")
    );
    assert!(!f.path("out").exists(), "--print-config must not run");
}

#[test]
fn jobs_fall_back_to_the_environment() {
    let f = Fixture::new(CONFIG);
    let o = f
        .command(&["--print-config"])
        .env("OMNIFORGE_JOBS", "3")
        .output()
        .unwrap();
    assert!(String::from_utf8(o.stdout).unwrap().contains("jobs: 3\n"));
    let o = f
        .command(&["--print-config", "--jobs", "2"])
        .env("OMNIFORGE_JOBS", "3")
        .output()
        .unwrap();
    assert!(String::from_utf8(o.stdout).unwrap().contains("jobs: 2\n"));
    let o = f
        .command(&["--print-config"])
        .env("OMNIFORGE_JOBS", "many")
        .output()
        .unwrap();
    assert_eq!(code(&o), 1);
}

#[test]
fn usage_and_config_errors_exit_1() {
    let f = Fixture::new(CONFIG);
    let o = Command::new(env!("CARGO_BIN_EXE_annotate"))
        .arg("--mesh")
        .arg("x.obj")
        .output()
        .unwrap();
    assert_eq!(code(&o), 1);

    let o = f.run(&["--cues", "depth,normals"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("did you mean"), "{}", stderr(&o));

    let bad = Fixture::new("sampling.n_pionts: 4\n");
    let o = bad.run(&[]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("sampling.n_points"), "{}", stderr(&o));

    let o = f.command_with("room.ply", "missing.cfg", &[]).output().unwrap();
    assert_eq!(code(&o), 1);
}

#[test]
fn help_exits_0() {
    let o = Command::new(env!("CARGO_BIN_EXE_annotate"))
        .arg("--help")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("--resume"));
}

#[test]
fn runtime_failures_exit_2() {
    let f = Fixture::new(CONFIG);
    let o = f.command_with("nope.obj", "run.cfg", &[]).output().unwrap();
    assert_eq!(code(&o), 2, "{}", stderr(&o));

    // Cameras cannot fit: the sampling band misses the room entirely.
    let f = Fixture::new(
        &format!("{CONFIG}sampling.camera_height_range: [10.0, 11.0]\n")
            .replace("sampling.camera_height_range: [0.3, 2.2]\n", ""),
    );
    let o = f.run(&[]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn resume_checks_the_config_hash() {
    let f = Fixture::new(CONFIG);
    assert_eq!(code(&f.run(&[])), 0);
    let before = std::fs::read(f.path("out").join(MANIFEST_FILE)).unwrap();
    let o = f.run(&["--resume", "--jobs", "3"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(std::fs::read(f.path("out").join(MANIFEST_FILE)).unwrap(), before);

    let o = f.run(&["--resume", "--seed", "6"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("different config"), "{}", stderr(&o));
}
