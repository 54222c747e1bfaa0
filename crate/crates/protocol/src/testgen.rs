//! proptest strategies producing arbitrary well-formed envelopes.

use std::collections::BTreeSet;

use proptest::prelude::*;
use proptest::strategy::{BoxedStrategy, Union};
use scenelab_core::{CameraPose, ObservationPlane, Quat, Transform, Vec3, VertexSelection};
use scenelab_detection::{Detection, DetectionBackendInfo};
use scenelab_logbook::{Action, LogEntry, LogFilter, Measurement, ObjectState, SceneConfiguration};

use crate::envelope::{Envelope, Message};
use crate::messages::*;

fn ident() -> BoxedStrategy<String> {
    "[a-z0-9_/.-]{1,16}".boxed()
}

/// Any text, including escapes and non-ASCII.
fn text() -> BoxedStrategy<String> {
    prop_oneof![
        "\\PC{0,24}",
        "[\"\\\\\n\t\u{0}-\u{1f} a-z]{0,12}",
        Just("ünïcødé ✓ 🔬".to_owned()),
    ]
    .boxed()
}

fn real() -> BoxedStrategy<f64> {
    prop_oneof![
        prop::num::f64::NORMAL | prop::num::f64::ZERO | prop::num::f64::SUBNORMAL,
        -10.0f64..10.0,
        Just(0.1),
        Just(1.0 / 3.0),
    ]
    .boxed()
}

fn unit() -> BoxedStrategy<f64> {
    (0.0f64..=1.0).boxed()
}

fn vec3() -> BoxedStrategy<Vec3> {
    (real(), real(), real()).prop_map(|(x, y, z)| Vec3::new(x, y, z)).boxed()
}

fn quat() -> BoxedStrategy<Quat> {
    (real(), real(), real(), real()).prop_map(|(w, x, y, z)| Quat::new(w, x, y, z)).boxed()
}

fn transform() -> BoxedStrategy<Transform> {
    (vec3(), quat(), vec3())
        .prop_map(|(translation, rotation, scale)| Transform {
            translation,
            rotation,
            scale,
        })
        .boxed()
}

fn opt<T: std::fmt::Debug + Clone + 'static>(s: BoxedStrategy<T>) -> BoxedStrategy<Option<T>> {
    prop::option::of(s).boxed()
}

fn session() -> BoxedStrategy<Option<String>> {
    opt(text())
}

fn camera() -> BoxedStrategy<CameraPose> {
    (vec3(), quat(), real(), any::<u32>(), any::<u32>())
        .prop_map(|(position, orientation, vertical_fov, width, height)| CameraPose {
            position,
            orientation,
            vertical_fov,
            width,
            height,
        })
        .boxed()
}

fn selection() -> BoxedStrategy<VertexSelection> {
    (text(), prop::collection::btree_set(any::<u32>(), 0..20))
        .prop_map(|(object_id, indices): (String, BTreeSet<u32>)| VertexSelection { object_id, indices })
        .boxed()
}

fn detection() -> BoxedStrategy<Detection> {
    (text(), unit(), [unit(), unit(), unit(), unit()])
        .prop_map(|(c, s, bbox)| Detection::new(c, s, bbox))
        .boxed()
}

fn backend_info() -> BoxedStrategy<DetectionBackendInfo> {
    (ident(), prop::collection::vec(text(), 0..6), any::<bool>())
        .prop_map(|(backend_id, label_set, remote)| DetectionBackendInfo {
            backend_id,
            label_set,
            remote,
        })
        .boxed()
}

fn measurement() -> BoxedStrategy<Measurement> {
    (vec3(), vec3(), real()).prop_map(|(a, b, distance)| Measurement { a, b, distance }).boxed()
}

fn config() -> BoxedStrategy<SceneConfiguration> {
    let object = (text(), transform(), opt(text())).prop_map(|(id, transform, label)| ObjectState { id, transform, label });
    (
        text(),
        text(),
        any::<u64>(),
        prop::collection::vec(object, 0..4),
        prop::collection::vec(measurement(), 0..3),
    )
        .prop_map(|(scene_id, name, created_at, objects, measurements)| SceneConfiguration {
            scene_id,
            name,
            created_at,
            objects,
            measurements,
        })
        .boxed()
}

fn indices() -> BoxedStrategy<Vec<u32>> {
    prop::collection::vec(any::<u32>(), 0..10).boxed()
}

fn action() -> BoxedStrategy<Action> {
    Union::new(vec![
        (text(), indices()).prop_map(|(object_id, indices)| Action::Select { object_id, indices }).boxed(),
        (text(), indices()).prop_map(|(object_id, indices)| Action::Expand { object_id, indices }).boxed(),
        (text(), indices()).prop_map(|(object_id, indices)| Action::Shrink { object_id, indices }).boxed(),
        text().prop_map(|object_id| Action::Grab { object_id }).boxed(),
        (text(), transform()).prop_map(|(object_id, transform)| Action::Move { object_id, transform }).boxed(),
        (text(), opt(transform()))
            .prop_map(|(object_id, transform)| Action::Release { object_id, transform })
            .boxed(),
        text().prop_map(|object_id| Action::Restore { object_id }).boxed(),
        measurement().prop_map(Action::Measure).boxed(),
        (text(), opt(text())).prop_map(|(object_id, label)| Action::Label { object_id, label }).boxed(),
        (text(), any::<usize>(), "[0-9a-f]{64}")
            .prop_map(|(object_id, vertex_count, image_sha256)| Action::ClassifyRequest {
                object_id,
                vertex_count,
                image_sha256,
            })
            .boxed(),
        (text(), ident(), prop::collection::vec(detection(), 0..3), any::<u64>(), opt(text()))
            .prop_map(|(object_id, backend_id, detections, latency_ms, label)| Action::ClassifyResult {
                object_id,
                backend_id,
                detections,
                latency_ms,
                label,
            })
            .boxed(),
        (text(), config()).prop_map(|(name, config)| Action::SaveConfig { name, config }).boxed(),
        (text(), config()).prop_map(|(name, config)| Action::LoadConfig { name, config }).boxed(),
        (text(), prop::collection::vec((text(), transform(), opt(text())), 0..3))
            .prop_map(|(scene_id, objs)| Action::SceneOpen {
                scene_id,
                objects: objs
                    .into_iter()
                    .map(|(id, transform, label)| ObjectState { id, transform, label })
                    .collect(),
            })
            .boxed(),
    ])
    .boxed()
}

fn entry() -> BoxedStrategy<LogEntry> {
    (any::<u64>(), any::<u64>(), text(), action())
        .prop_map(|(seq, ts, session, action)| LogEntry { seq, ts, session, action })
        .boxed()
}

fn filter() -> BoxedStrategy<LogFilter> {
    (opt(text()), opt(ident()), opt(any::<u64>().boxed()), opt(any::<u64>().boxed()))
        .prop_map(|(session, action, from_seq, to_seq)| LogFilter {
            session,
            action,
            from_seq,
            to_seq,
        })
        .boxed()
}

fn bytes() -> BoxedStrategy<Base64Bytes> {
    prop::collection::vec(any::<u8>(), 0..64).prop_map(Base64Bytes).boxed()
}

fn object_info() -> BoxedStrategy<ObjectInfo> {
    (text(), text(), any::<usize>(), any::<usize>(), transform(), transform(), opt(text()))
        .prop_map(|(id, name, vertex_count, triangle_count, transform, original, label)| ObjectInfo {
            id,
            name,
            vertex_count,
            triangle_count,
            transform,
            original,
            label,
        })
        .boxed()
}

fn json_value() -> BoxedStrategy<serde_json::Value> {
    prop_oneof![
        Just(serde_json::Value::Null),
        text().prop_map(serde_json::Value::from),
        any::<i64>().prop_map(serde_json::Value::from),
        (text(), text()).prop_map(|(k, v)| serde_json::json!({ k: v })),
    ]
    .boxed()
}

pub fn request() -> BoxedStrategy<Request> {
    let object_ref = || (session(), text()).prop_map(|(session_id, object_id)| ObjectRef { session_id, object_id });
    Union::new(vec![
        Just(Request::Ping {}).boxed(),
        Just(Request::ListScenes {}).boxed(),
        (text(), session())
            .prop_map(|(scene_id, session_id)| Request::OpenScene(OpenScene { scene_id, session_id }))
            .boxed(),
        (session(), text(), indices())
            .prop_map(|(session_id, object_id, indices)| Request::Select(Select { session_id, object_id, indices }))
            .boxed(),
        session().prop_map(|session_id| Request::ExpandSelection(SessionOnly { session_id })).boxed(),
        session().prop_map(|session_id| Request::ShrinkSelection(SessionOnly { session_id })).boxed(),
        session().prop_map(|session_id| Request::ValidateSelection(SessionOnly { session_id })).boxed(),
        (session(), camera(), opt(real()))
            .prop_map(|(session_id, camera, padding)| Request::Snapshot(Snapshot { session_id, camera, padding }))
            .boxed(),
        (session(), bytes(), text(), any::<usize>(), opt(unit()))
            .prop_map(|(session_id, image, object_id, vertex_count, min_score)| {
                Request::Classify(ClassifyRequest {
                    session_id,
                    image,
                    object_id,
                    vertex_count,
                    min_score,
                })
            })
            .boxed(),
        (session(), text(), opt(text()))
            .prop_map(|(session_id, object_id, label)| Request::SetLabel(SetLabel { session_id, object_id, label }))
            .boxed(),
        object_ref().prop_map(Request::Grab).boxed(),
        (session(), text(), transform())
            .prop_map(|(session_id, object_id, transform)| {
                Request::SetTransform(SetTransform {
                    session_id,
                    object_id,
                    transform,
                })
            })
            .boxed(),
        object_ref().prop_map(Request::Release).boxed(),
        object_ref().prop_map(Request::RestoreOriginal).boxed(),
        (session(), vec3(), vec3())
            .prop_map(|(session_id, a, b)| Request::Measure(Measure { session_id, a, b }))
            .boxed(),
        (session(), text(), any::<bool>())
            .prop_map(|(session_id, name, overwrite)| Request::SaveConfig(SaveConfig { session_id, name, overwrite }))
            .boxed(),
        (session(), text())
            .prop_map(|(session_id, name)| Request::LoadConfig(LoadConfig { session_id, name }))
            .boxed(),
        (session(), action())
            .prop_map(|(session_id, action)| Request::LogWrite(LogWrite { session_id, action }))
            .boxed(),
        filter().prop_map(|filter| Request::LogQuery(LogQuery { filter })).boxed(),
        text().prop_map(|path| Request::GetAsset(GetAsset { path })).boxed(),
        backend_info().prop_map(Request::RegisterBackend).boxed(),
    ])
    .boxed()
}

pub fn response() -> BoxedStrategy<Response> {
    let sel = || selection().prop_map(|selection| SelectionBody { selection });
    let obj = || object_info().prop_map(|object| ObjectBody { object });
    let cfg = || config().prop_map(|config| ConfigBody { config });
    Union::new(vec![
        Just(Response::Pong {}).boxed(),
        prop::collection::vec(
            (text(), text(), opt(text()), json_value()).prop_map(|(scene_id, file, thumbnail, meta)| SceneDescriptor {
                scene_id,
                file,
                thumbnail,
                meta,
            }),
            0..3,
        )
        .prop_map(|scenes| Response::ListScenesResult(ScenesBody { scenes }))
        .boxed(),
        (text(), text(), prop::collection::vec(object_info(), 0..3))
            .prop_map(|(session_id, scene_id, objects)| {
                Response::OpenSceneResult(OpenSceneResult {
                    session_id,
                    scene_id,
                    objects,
                })
            })
            .boxed(),
        sel().prop_map(Response::SelectResult).boxed(),
        sel().prop_map(Response::ExpandSelectionResult).boxed(),
        sel().prop_map(Response::ShrinkSelectionResult).boxed(),
        (text(), any::<bool>(), any::<usize>(), any::<usize>(), any::<usize>())
            .prop_map(|(object_id, watertight, boundary_edges, non_manifold_edges, induced_triangles)| {
                Response::ValidateSelectionResult(ValidateResult {
                    object_id,
                    watertight,
                    boundary_edges,
                    non_manifold_edges,
                    induced_triangles,
                })
            })
            .boxed(),
        (bytes(), any::<u32>(), any::<u32>(), vec3(), vec3(), vec3(), selection())
            .prop_map(|(image, width, height, center, normal, up, selection)| {
                Response::SnapshotResult(SnapshotResult {
                    image,
                    width,
                    height,
                    plane: ObservationPlane { center, normal, up },
                    selection,
                })
            })
            .boxed(),
        (prop::collection::vec(detection(), 0..4), ident(), any::<u64>(), opt(text()), opt(text()))
            .prop_map(|(detections, backend_id, latency_ms, label, warning)| {
                Response::ClassifyResult(ClassifyResult {
                    detections,
                    backend_id,
                    latency_ms,
                    label,
                    warning,
                })
            })
            .boxed(),
        obj().prop_map(Response::SetLabelResult).boxed(),
        obj().prop_map(Response::GrabResult).boxed(),
        obj().prop_map(Response::SetTransformResult).boxed(),
        obj().prop_map(Response::ReleaseResult).boxed(),
        obj().prop_map(Response::RestoreOriginalResult).boxed(),
        (vec3(), vec3(), real())
            .prop_map(|(a, b, distance)| Response::MeasureResult(MeasureResult { a, b, distance }))
            .boxed(),
        cfg().prop_map(Response::SaveConfigResult).boxed(),
        cfg().prop_map(Response::LoadConfigResult).boxed(),
        entry().prop_map(|entry| Response::LogWriteResult(EntryBody { entry })).boxed(),
        prop::collection::vec(entry(), 0..3)
            .prop_map(|entries| Response::LogQueryResult(EntriesBody { entries }))
            .boxed(),
        (text(), bytes())
            .prop_map(|(path, data)| Response::GetAssetResult(AssetBody { path, data }))
            .boxed(),
        ident()
            .prop_map(|backend_id| Response::RegisterBackendResult(RegisteredBody { backend_id }))
            .boxed(),
        (prop::sample::select(ERROR_CODES.to_vec()), text())
            .prop_map(|(c, m)| Response::Error(ErrorBody::new(c, m)))
            .boxed(),
    ])
    .boxed()
}

pub fn envelope() -> BoxedStrategy<Envelope> {
    (
        text(),
        prop_oneof![request().prop_map(Message::Request), response().prop_map(Message::Response)],
    )
        .prop_map(|(id, message)| Envelope { id, message })
        .boxed()
}
