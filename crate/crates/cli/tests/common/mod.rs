#![allow(dead_code)]

use std::io::{BufRead, BufReader};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};

use scenelab_core::raster::encode_png;
use scenelab_detection::{Detection, StubManifest};

pub fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_scenelab"));
    for var in ["SCENELAB_PORT", "SCENELAB_WS_PORT", "SCENELAB_ASSETS", "SCENELAB_LOG"] {
        c.env_remove(var);
    }
    c
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

pub fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(name)
}

/// `lab/` (OBJ: floor, N1, N2) under `root/assets`, plus a file outside it.
pub fn assets(root: &Path) -> PathBuf {
    let assets = root.join("assets");
    std::fs::create_dir_all(assets.join("lab")).unwrap();
    std::fs::copy(fixture("lab.obj"), assets.join("lab/scene.obj")).unwrap();
    std::fs::write(assets.join("lab/meta.json"), r#"{"unit_scale":1.0}"#).unwrap();
    std::fs::write(root.join("secret.txt"), "do not serve").unwrap();
    assets
}

/// A small PNG whose bytes depend on `seed`.
pub fn image(seed: u8) -> Vec<u8> {
    let px: Vec<u8> = (0..8 * 8 * 3).map(|i| (i as u8).wrapping_mul(seed).wrapping_add(seed)).collect();
    encode_png(&px, 8, 8)
}

pub fn det(class: &str, score: f64) -> Detection {
    Detection::new(class, score, [0.1, 0.1, 0.6, 0.7])
}

/// Writes each image of `spec` under `dir` and a manifest answering it.
pub fn corpus(dir: &Path, spec: &[(&str, Vec<Detection>)]) -> StubManifest {
    let mut m = StubManifest::default();
    for (i, (name, dets)) in spec.iter().enumerate() {
        let png = image(i as u8 + 1);
        let path = dir.join(name);
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, &png).unwrap();
        m.insert(&png, dets.clone());
    }
    m
}

/// The ten-image corpus: 13 detections, 9 of them correct.
pub fn ten_image_corpus(dir: &Path) -> (StubManifest, &'static str) {
    let spec = vec![
        ("i0.png", vec![det("tv", 0.95)]),
        ("i1.png", vec![det("cup", 0.91), det("book", 0.40)]),
        ("i2.png", vec![]),
        ("sub/i3.png", vec![det("keyboard", 0.94), det("mouse", 0.5)]),
        ("sub/i4.png", vec![det("dog", 0.83)]),
        ("i5.png", vec![det("chair", 0.72), det("chair", 0.56)]),
        ("i6.png", vec![det("bottle", 0.79)]),
        ("i7.png", vec![det("person", 0.3), det("handbag", 0.59)]),
        ("i8.png", vec![det("bowl", 0.53)]),
        ("i9.png", vec![det("cat", 0.61)]),
    ];
    let truth = r#"{
        "i0.png": ["tv"], "i1.png": ["cup"], "i2.png": ["bed"],
        "sub/i3.png": ["keyboard", "mouse"], "sub/i4.png": ["chair"], "i5.png": ["chair"],
        "i6.png": ["bottle", "cup"], "i7.png": ["handbag"], "i8.png": ["bowl"], "i9.png": ["dining table"]
    }"#;
    (corpus(dir, &spec), truth)
}

pub fn normalized(line: &str) -> String {
    line.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// A `scenelab serve` child on ephemeral ports.
pub struct ServeProc {
    pub child: Child,
    pub tcp: SocketAddr,
    pub ws: SocketAddr,
}

impl ServeProc {
    pub fn spawn(assets: &Path, log_dir: &Path, extra: &[&str]) -> ServeProc {
        let mut child = bin()
            .args(["serve", "--port", "0", "--ws-port", "0", "--assets"])
            .arg(assets)
            .arg("--log-dir")
            .arg(log_dir)
            .args(extra)
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .expect("serve starts");
        let mut line = String::new();
        BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
        let mut parts = line.split_whitespace();
        assert_eq!(parts.next(), Some("listening"), "unexpected first line {line:?}");
        let addr = |p: Option<&str>, key: &str| -> SocketAddr {
            p.and_then(|s| s.strip_prefix(key)).unwrap_or_else(|| panic!("{line:?}")).parse().unwrap()
        };
        let tcp = addr(parts.next(), "tcp=");
        let ws = addr(parts.next(), "ws=");
        ServeProc { child, tcp, ws }
    }

    /// SIGKILL: no shutdown path runs.
    pub fn kill9(mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }

    /// SIGTERM, then the exit status.
    pub fn terminate(mut self) -> std::process::ExitStatus {
        let pid = self.child.id().to_string();
        Command::new("kill").args(["-TERM", &pid]).status().expect("kill runs");
        self.child.wait().unwrap()
    }
}

impl Drop for ServeProc {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}
