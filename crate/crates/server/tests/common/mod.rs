#![allow(dead_code)]

use std::path::{Path, PathBuf};

use scenelab_core::{CameraPose, Vec3};
use scenelab_detection::StubManifest;
use scenelab_protocol::messages::*;
use scenelab_protocol::{Request, Response};
use scenelab_server::{start, Client, ServerConfig, ServerHandle};

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(name)
}

/// `lab/` (OBJ, three objects) and `two/` (glTF) under `root/assets`.
pub fn assets(root: &Path) -> PathBuf {
    let assets = root.join("assets");
    std::fs::create_dir_all(assets.join("lab")).unwrap();
    std::fs::create_dir_all(assets.join("two")).unwrap();
    std::fs::copy(fixture("lab.obj"), assets.join("lab/scene.obj")).unwrap();
    std::fs::write(assets.join("lab/meta.json"), r#"{"title":"lab bench","unit_scale":1.0}"#).unwrap();
    std::fs::copy(fixture("two_nodes.gltf"), assets.join("two/scene.gltf")).unwrap();
    std::fs::copy(fixture("tetra.bin"), assets.join("two/tetra.bin")).unwrap();
    std::fs::write(root.join("secret.txt"), "do not serve").unwrap();
    assets
}

pub fn config(root: &Path) -> ServerConfig {
    ServerConfig::new(assets(root), root.join("logs")).ephemeral()
}

pub async fn server(root: &Path, stub: Option<StubManifest>) -> ServerHandle {
    let mut cfg = config(root);
    cfg.stub = stub;
    start(cfg).await.expect("server starts")
}

pub fn camera() -> CameraPose {
    CameraPose::look_at(Vec3::new(0.6, 0.7, 0.9), Vec3::new(0.05, 0.15, 0.05), Vec3::Y)
        .unwrap()
        .with_resolution(128, 128)
}

pub async fn open_lab(c: &mut Client) -> OpenSceneResult {
    match c
        .call_ok(Request::OpenScene(OpenScene {
            scene_id: "lab".into(),
            session_id: None,
        }))
        .await
        .unwrap()
    {
        Response::OpenSceneResult(r) => r,
        other => panic!("{other:?}"),
    }
}

pub async fn select_n1(c: &mut Client) {
    c.call_ok(Request::Select(Select {
        session_id: None,
        object_id: "lab/N1/0".into(),
        indices: vec![0, 1, 2, 3],
    }))
    .await
    .unwrap();
}

pub async fn snapshot_png(c: &mut Client) -> Vec<u8> {
    match c
        .call_ok(Request::Snapshot(Snapshot {
            session_id: None,
            camera: camera(),
            padding: None,
        }))
        .await
        .unwrap()
    {
        Response::SnapshotResult(s) => s.image.0,
        other => panic!("{other:?}"),
    }
}

pub fn classify(image: Vec<u8>) -> Request {
    Request::Classify(ClassifyRequest {
        session_id: None,
        image: image.into(),
        object_id: "lab/N1/0".into(),
        vertex_count: 4,
        min_score: None,
    })
}

pub fn error_code(r: &Response) -> Option<&str> {
    r.as_error().map(|e| e.code.as_str())
}
