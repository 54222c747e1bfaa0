mod common;

use std::path::Path;

use common::*;
use scenelab_core::{Quat, Transform, Vec3};
use scenelab_detection::{Detection, StubManifest, NO_DETECTION_WARNING};
use scenelab_logbook::{LogFilter, SceneConfiguration};
use scenelab_protocol::messages::*;
use scenelab_protocol::{Request, Response};
use scenelab_server::{start, Client, ServerConfig};

fn code(o: &std::process::Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn listing(dir: &Path) -> Vec<String> {
    let mut out = Vec::new();
    fn walk(root: &Path, dir: &Path, out: &mut Vec<String>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            out.push(p.strip_prefix(root).unwrap().display().to_string());
            if p.is_dir() {
                walk(root, &p, out);
            }
        }
    }
    walk(dir, dir, &mut out);
    out.sort();
    out
}

#[test]
fn usage_errors_exit_2() {
    let o = run(&["bogus"]);
    assert_eq!(code(&o), 2);
    assert!(text(&o.stderr).contains("Usage"), "{}", text(&o.stderr));
    assert!(o.stdout.is_empty());

    let o = run(&[]);
    assert_eq!(code(&o), 2);

    let o = run(&["detect", "--image", "x.png"]);
    assert_eq!(code(&o), 2, "missing --manifest");
    assert!(text(&o.stderr).contains("--manifest"));

    let o = bin().args(["serve", "--log-dir", "l"]).env("SCENELAB_ASSETS", "a").env("SCENELAB_PORT", "abc").output().unwrap();
    assert_eq!(code(&o), 2, "bad env value is a usage error");
}

#[test]
fn help_documents_every_flag() {
    let expected: &[(&str, &[&str])] = &[
        (
            "serve",
            &[
                "--bind", "--port", "--ws-port", "--assets", "--log-dir", "--viewer", "--stub-manifest", "--min-score",
                "--classify-timeout", "--max-log-bytes", "SCENELAB_PORT", "SCENELAB_WS_PORT", "SCENELAB_ASSETS", "SCENELAB_LOG",
            ],
        ),
        ("worker", &["--server", "--manifest", "--name"]),
        ("import-scene", &["<FILE>", "--id", "--unit-scale", "--install", "--assets", "--force"]),
        (
            "bench",
            &[
                "--backend", "--manifest", "--name", "--corpus", "--truth", "--min-score", "--subset", "--seed",
                "--parallelism", "--timeout", "--accuracy", "--format", "--out", "--from-results", "--compare", "--objects",
            ],
        ),
        ("export", &["--session", "--out", "--log-dir", "SCENELAB_LOG"]),
        ("replay", &["--export"]),
        ("detect", &["--image", "--manifest", "--min-score"]),
    ];
    for (sub, flags) in expected {
        let o = run(&[sub, "--help"]);
        assert_eq!(code(&o), 0);
        let help = text(&o.stdout);
        for f in *flags {
            assert!(help.contains(f), "`{sub} --help` lacks {f}:\n{help}");
        }
    }
    let top = text(&run(&["--help"]).stdout);
    for sub in expected.iter().map(|(s, _)| s) {
        assert!(top.contains(sub));
    }
}

fn write_manifest(dir: &Path, m: &StubManifest) -> String {
    let path = dir.join("manifest.json");
    std::fs::write(&path, m.to_json()).unwrap();
    path.display().to_string()
}

#[test]
fn detect_prints_ranked_detections() {
    let dir = tempfile::tempdir().unwrap();
    let png = image(7);
    let mut m = StubManifest::default();
    m.insert(
        &png,
        vec![Detection::new("chair", 0.3, [0.0, 0.0, 0.2, 0.2]), Detection::new("tv", 0.989, [0.1, 0.2, 0.5, 0.625])],
    );
    let manifest = write_manifest(dir.path(), &m);
    let img = dir.path().join("tv.png");
    std::fs::write(&img, &png).unwrap();
    let img = img.display().to_string();

    let o = run(&["detect", "--image", &img, "--manifest", &manifest]);
    assert_eq!(code(&o), 0, "{}", text(&o.stderr));
    assert_eq!(text(&o.stdout), "tv 0.989 [0.1 0.2 0.5 0.625]\n");

    let o = run(&["detect", "--image", &img, "--manifest", &manifest, "--min-score", "0"]);
    assert_eq!(text(&o.stdout), "tv 0.989 [0.1 0.2 0.5 0.625]\nchair 0.3 [0 0 0.2 0.2]\n");

    // unknown image: nothing detected is not an error
    let other = dir.path().join("other.png");
    std::fs::write(&other, image(8)).unwrap();
    let o = run(&["detect", "--image", other.to_str().unwrap(), "--manifest", &manifest]);
    assert_eq!(code(&o), 0);
    assert!(o.stdout.is_empty());
    assert!(text(&o.stderr).contains(NO_DETECTION_WARNING));

    let broken = dir.path().join("broken.png");
    std::fs::write(&broken, &png[..png.len() - 10]).unwrap();
    let o = run(&["detect", "--image", broken.to_str().unwrap(), "--manifest", &manifest]);
    assert_eq!(code(&o), 1);
    assert!(text(&o.stderr).starts_with("error:"));

    let o = run(&["detect", "--image", &img, "--manifest", &manifest, "--min-score", "1.5"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn import_scene_checks_and_installs() {
    let dir = tempfile::tempdir().unwrap();
    let lab = fixture("lab.obj");
    let o = bin()
        .current_dir(dir.path())
        .args(["import-scene", lab.to_str().unwrap(), "--id", "bench"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", text(&o.stderr));
    let out = text(&o.stdout);
    assert!(out.starts_with("scene bench: 3 objects"), "{out}");
    assert!(out.contains("bench/N1/0  4 vertices  4 triangles"), "{out}");
    assert!(listing(dir.path()).is_empty(), "a check writes nothing");

    let assets = dir.path().join("assets");
    std::fs::create_dir(&assets).unwrap();
    let gltf = fixture("two_nodes.gltf");
    let install = |extra: &[&str]| {
        bin()
            .args(["import-scene", gltf.to_str().unwrap(), "--id", "two", "--unit-scale", "0.01", "--install"])
            .args(extra)
            .env("SCENELAB_ASSETS", &assets)
            .output()
            .unwrap()
    };
    let o = install(&[]);
    assert_eq!(code(&o), 0, "{}", text(&o.stderr));
    assert_eq!(listing(&assets), ["two", "two/meta.json", "two/scene.gltf", "two/tetra.bin"]);
    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(assets.join("two/meta.json")).unwrap()).unwrap();
    assert_eq!(meta["unit_scale"], 0.01);
    scenelab_core::load_scene(&assets.join("two/scene.gltf"), 0.01).unwrap();

    let o = install(&[]);
    assert_eq!(code(&o), 1, "refuses to replace without --force");
    assert!(text(&o.stderr).contains("--force"));
    assert_eq!(code(&install(&["--force"])), 0);

    // the flag wins over the environment
    let elsewhere = dir.path().join("elsewhere");
    std::fs::create_dir(&elsewhere).unwrap();
    assert_eq!(code(&install(&["--assets", elsewhere.to_str().unwrap()])), 0);
    assert!(elsewhere.join("two/scene.gltf").is_file());

    // validated before anything is written
    let fresh = dir.path().join("fresh");
    std::fs::create_dir(&fresh).unwrap();
    for bad in [vec!["--unit-scale", "0"], vec!["--unit-scale", "-1"], vec!["--id", "../up"]] {
        let mut args = vec!["import-scene", gltf.to_str().unwrap(), "--install", "--assets", fresh.to_str().unwrap()];
        if bad[0] != "--id" {
            args.extend(["--id", "x"]);
        }
        args.extend(bad.iter().copied());
        let o = run(&args);
        assert_eq!(code(&o), 2, "{args:?}");
    }
    assert!(listing(&fresh).is_empty());

    let o = run(&["import-scene", gltf.to_str().unwrap(), "--id", "x", "--install"]);
    assert_eq!(code(&o), 2, "--install needs an asset root");

    let bad = fixture("bad_face.obj");
    let o = run(&["import-scene", bad.to_str().unwrap(), "--id", "bad"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn bench_runs_caches_and_compares() {
    let dir = tempfile::tempdir().unwrap();
    let corpus_dir = dir.path().join("corpus");
    let (m, truth) = ten_image_corpus(&corpus_dir);
    let manifest = write_manifest(dir.path(), &m);
    let truth_path = dir.path().join("truth.json");
    std::fs::write(&truth_path, truth).unwrap();
    let out = dir.path().join("out");
    let (c, t, o_) = (corpus_dir.to_str().unwrap(), truth_path.to_str().unwrap(), out.to_str().unwrap());

    let o = run(&["bench", "--backend", "stub", "--manifest", &manifest, "--corpus", c, "--truth", t, "--min-score", "0", "--out", o_]);
    assert_eq!(code(&o), 0, "{}", text(&o.stderr));
    let report = text(&o.stdout);
    let lines: Vec<String> = report.lines().map(normalized).collect();
    assert_eq!(lines[0], "Model #Detected Object Accuracy (%) Avg Computational Time (sec)");
    assert!(lines[1].starts_with("stub 13 69 "), "{report}");
    assert!(lines.contains(&"accuracy (%): 69.2".to_owned()), "{report}");
    assert!(lines.contains(&"dining table 61 (cat)".to_owned()), "{report}");
    assert!(lines.contains(&"bed X".to_owned()), "{report}");
    assert_eq!(std::fs::read_to_string(out.join("report.txt")).unwrap(), report);
    for f in ["report.json", "results.json"] {
        assert!(out.join(f).is_file());
    }

    // the report is rebuilt from cached results without running the detector
    let results = out.join("results.json");
    let o = run(&["bench", "--from-results", results.to_str().unwrap(), "--truth", t]);
    assert_eq!(code(&o), 0, "{}", text(&o.stderr));
    assert_eq!(text(&o.stdout), report);

    let o = run(&["bench", "--from-results", results.to_str().unwrap(), "--truth", t, "--format", "json", "--accuracy", "per-image"]);
    let json: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(json["detected_objects"], 13);
    assert_eq!(json["accuracy_mode"], "per_image");
    assert!((json["accuracy_pct"].as_f64().unwrap() - 600.0 / 9.0).abs() < 1e-9);

    // seeded subsets are reproducible
    let sub = |seed: &str| {
        let o = run(&["bench", "--manifest", &manifest, "--corpus", c, "--truth", t, "--subset", "4", "--seed", seed, "--format", "json"]);
        assert_eq!(code(&o), 0);
        let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        assert_eq!(v["n_images"], 4);
        v["per_class"].clone()
    };
    assert_eq!(sub("3"), sub("3"));

    // comparison table from two reports
    let renamed = dir.path().join("renamed");
    let o = run(&["bench", "--from-results", results.to_str().unwrap(), "--truth", t, "--name", "Other", "--out", renamed.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let a = out.join("report.json");
    let b = renamed.join("report.json");
    let o = run(&["bench", "--compare", a.to_str().unwrap(), b.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", text(&o.stderr));
    let rows: Vec<String> = text(&o.stdout).lines().map(normalized).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("stub 13 69 ") && rows[2].starts_with("Other 13 69 "), "{rows:?}");

    // precondition failures are runtime errors
    let partial = dir.path().join("partial.json");
    std::fs::write(&partial, r#"{"i0.png": ["tv"]}"#).unwrap();
    let o = run(&["bench", "--manifest", &manifest, "--corpus", c, "--truth", partial.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(text(&o.stderr).contains("no ground truth"), "{}", text(&o.stderr));

    // usage errors write nothing
    let never = dir.path().join("never");
    let o = run(&["bench", "--manifest", &manifest, "--corpus", c, "--truth", t, "--min-score", "2", "--out", never.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(!never.exists());
}

#[test]
fn bench_objects_table() {
    let dir = tempfile::tempdir().unwrap();
    let (cup, person, chair) = (image(1), image(2), image(3));
    for (name, png) in [("cup.png", &cup), ("person.png", &person), ("chair.png", &chair)] {
        std::fs::write(dir.path().join(name), png).unwrap();
    }
    let mut m = StubManifest::default();
    m.insert(&cup, vec![det("cup", 0.91), det("bowl", 0.2)]);
    m.insert(&person, vec![det("dress", 0.67)]);
    let manifest = write_manifest(dir.path(), &m);
    let objects = dir.path().join("objects.json");
    std::fs::write(&objects, r#"{"cup": "cup.png", "person": "person.png", "chair": "chair.png"}"#).unwrap();
    let o = run(&["bench", "--manifest", &manifest, "--objects", objects.to_str().unwrap(), "--name", "M"]);
    assert_eq!(code(&o), 0, "{}", text(&o.stderr));
    let rows: Vec<String> = text(&o.stdout).lines().map(normalized).collect();
    assert_eq!(rows, ["Object M", "chair X", "cup 91", "person 67 (dress)"]);
}

async fn scripted_session(addr: std::net::SocketAddr) -> (String, SceneConfiguration) {
    let mut c = Client::connect(addr).await.unwrap();
    let open = match c
        .call_ok(Request::OpenScene(OpenScene { scene_id: "lab".into(), session_id: None }))
        .await
        .unwrap()
    {
        Response::OpenSceneResult(r) => r,
        other => panic!("{other:?}"),
    };
    let moved = Transform {
        translation: Vec3::new(0.5, 0.0, -0.25),
        rotation: Quat::from_axis_angle(Vec3::Y, 0.3),
        scale: Vec3::new(1.0, 1.0, 1.0),
    };
    for req in [
        Request::Grab(ObjectRef { session_id: None, object_id: "lab/N2/0".into() }),
        Request::SetTransform(SetTransform { session_id: None, object_id: "lab/N2/0".into(), transform: moved }),
        Request::Release(ObjectRef { session_id: None, object_id: "lab/N2/0".into() }),
        Request::SetLabel(SetLabel { session_id: None, object_id: "lab/N1/0".into(), label: Some("cup".into()) }),
        Request::Measure(Measure { session_id: None, a: Vec3::new(0.0, 0.0, 0.0), b: Vec3::new(3.0, 4.0, 0.0) }),
    ] {
        c.call_ok(req).await.unwrap();
    }
    let config = match c
        .call_ok(Request::SaveConfig(SaveConfig { session_id: None, name: "final".into(), overwrite: false }))
        .await
        .unwrap()
    {
        Response::SaveConfigResult(b) => b.config,
        other => panic!("{other:?}"),
    };
    (open.session_id, config)
}

#[tokio::test(flavor = "multi_thread")]
async fn export_and_replay() {
    let dir = tempfile::tempdir().unwrap();
    let assets = assets(dir.path());
    let logs = dir.path().join("logs");
    let handle = start(ServerConfig::new(&assets, &logs).ephemeral()).await.unwrap();
    let (session, saved) = scripted_session(handle.tcp_addr).await;
    assert_eq!(handle.app().store.query(&LogFilter::session(&session)).len(), 7);
    handle.stop().await;

    let log_bytes = std::fs::read(logs.join("log.jsonl")).unwrap();
    let out = dir.path().join("export");
    // the environment names the log directory when the flag is absent
    let o = bin()
        .args(["export", "--session", &session, "--out", out.to_str().unwrap()])
        .env("SCENELAB_LOG", &logs)
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", text(&o.stderr));
    assert!(text(&o.stdout).contains("7 entries"));
    assert_eq!(std::fs::read(logs.join("log.jsonl")).unwrap(), log_bytes, "export leaves the log untouched");

    let o = run(&["replay", "--export", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", text(&o.stderr));
    let replayed: SceneConfiguration = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(replayed.objects, saved.objects);
    assert_eq!(replayed.measurements, saved.measurements);
    assert_eq!(replayed.scene_id, saved.scene_id);

    // one corrupted transform in the stored configuration
    let cfg_path = out.join("config.json");
    let mut cfg: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&cfg_path).unwrap()).unwrap();
    let objects = cfg["objects"].as_array_mut().unwrap();
    let n2 = objects.iter_mut().find(|o| o["id"] == "lab/N2/0").unwrap();
    n2["transform"]["translation"][0] = serde_json::json!(9.0);
    std::fs::write(&cfg_path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    let o = run(&["replay", "--export", out.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    let err = text(&o.stderr);
    assert!(err.contains("lab/N2/0: transform"), "{err}");
    assert!(o.stdout.is_empty());

    // the flag wins over the environment; unknown sessions fail
    let o = bin()
        .args(["export", "--session", "nope", "--out", dir.path().join("x").to_str().unwrap(), "--log-dir", logs.to_str().unwrap()])
        .env("SCENELAB_LOG", dir.path().join("missing"))
        .output()
        .unwrap();
    assert_eq!(code(&o), 1);
    assert!(text(&o.stderr).contains("nope"), "{}", text(&o.stderr));
    assert!(!dir.path().join("x").exists());

    let o = run(&["replay", "--export", dir.path().join("missing").to_str().unwrap()]);
    assert_eq!(code(&o), 1);
}

#[tokio::test(flavor = "multi_thread")]
async fn serve_binary_answers_and_stops_on_sigterm() {
    let dir = tempfile::tempdir().unwrap();
    let assets = assets(dir.path());
    let logs = dir.path().join("logs");
    let server = ServeProc::spawn(&assets, &logs, &[]);
    let mut c = Client::connect(server.tcp).await.unwrap();
    assert!(matches!(c.call_ok(Request::Ping {}).await.unwrap(), Response::Pong {}));
    match c.call_ok(Request::ListScenes {}).await.unwrap() {
        Response::ListScenesResult(s) => assert_eq!(s.scenes.len(), 1),
        other => panic!("{other:?}"),
    }
    drop(c);
    let status = tokio::task::spawn_blocking(move || server.terminate()).await.unwrap();
    assert!(status.success(), "{status:?}");
    // only the named directories were written
    let mut top = listing(dir.path());
    top.retain(|p| !p.contains('/'));
    assert_eq!(top, ["assets", "logs", "secret.txt"]);
}

#[tokio::test(flavor = "multi_thread")]
async fn worker_subcommand_serves_classify() {
    let dir = tempfile::tempdir().unwrap();
    let assets = assets(dir.path());
    let handle = start(ServerConfig::new(&assets, dir.path().join("logs")).ephemeral()).await.unwrap();
    let mut c = Client::connect(handle.tcp_addr).await.unwrap();
    c.call_ok(Request::OpenScene(OpenScene { scene_id: "lab".into(), session_id: None })).await.unwrap();
    c.call_ok(Request::Select(Select { session_id: None, object_id: "lab/N1/0".into(), indices: vec![0, 1, 2, 3] }))
        .await
        .unwrap();
    let png = image(5);
    let mut m = StubManifest::default();
    m.insert(&png, vec![det("cup", 0.8)]);
    let manifest = write_manifest(dir.path(), &m);
    let classify = Request::Classify(ClassifyRequest {
        session_id: None,
        image: png.into(),
        object_id: "lab/N1/0".into(),
        vertex_count: 4,
        min_score: None,
    });

    let mut worker = bin()
        .args(["worker", "--server", &handle.tcp_addr.to_string(), "--manifest", &manifest, "--name", "remote-stub"])
        .stderr(std::process::Stdio::null())
        .spawn()
        .unwrap();
    let mut answered = None;
    for _ in 0..200 {
        match c.call(classify.clone()).await.unwrap() {
            Response::Error(e) if e.code == "no_backend" => tokio::time::sleep(std::time::Duration::from_millis(25)).await,
            other => {
                answered = Some(other);
                break;
            }
        }
    }
    let _ = worker.kill();
    let _ = worker.wait();
    match answered.expect("worker registered") {
        Response::ClassifyResult(r) => {
            assert_eq!(r.backend_id, "remote-stub");
            assert_eq!(r.label.as_deref(), Some("cup"));
        }
        other => panic!("{other:?}"),
    }
    handle.stop().await;
}
