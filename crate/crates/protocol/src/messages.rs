//! Typed request and response bodies.

use base64::Engine as _;
use scenelab_core::{CameraPose, ObservationPlane, Transform, Vec3, VertexSelection};
use scenelab_detection::{Detection, DetectionBackendInfo};
use scenelab_logbook::{Action, LogEntry, LogFilter, SceneConfiguration};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Binary content carried as standard base64 text.
#[derive(Clone, Default, PartialEq, Eq)]
pub struct Base64Bytes(pub Vec<u8>);

impl std::fmt::Debug for Base64Bytes {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Base64Bytes({} bytes)", self.0.len())
    }
}

impl Serialize for Base64Bytes {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&base64::engine::general_purpose::STANDARD.encode(&self.0))
    }
}

impl<'de> Deserialize<'de> for Base64Bytes {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        base64::engine::general_purpose::STANDARD
            .decode(s.as_bytes())
            .map(Base64Bytes)
            .map_err(|e| serde::de::Error::custom(format!("invalid base64: {e}")))
    }
}

impl From<Vec<u8>> for Base64Bytes {
    fn from(v: Vec<u8>) -> Self {
        Base64Bytes(v)
    }
}

/// Stable machine-readable error codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    MalformedMessage,
    UnsupportedVersion,
    UnknownType,
    NoSession,
    UnknownScene,
    UnknownObject,
    IndexOutOfRange,
    EmptySelection,
    NothingVisible,
    DegeneratePose,
    InvalidArgument,
    InvalidTransform,
    InvalidImage,
    NoBackend,
    BackendTimeout,
    BackendError,
    UnknownConfig,
    NameCollision,
    ReplayMismatch,
    StorageFull,
    Forbidden,
    NotFound,
    ImportFailed,
    ShuttingDown,
    Internal,
}

pub const ERROR_CODES: [ErrorCode; 25] = [
    ErrorCode::MalformedMessage,
    ErrorCode::UnsupportedVersion,
    ErrorCode::UnknownType,
    ErrorCode::NoSession,
    ErrorCode::UnknownScene,
    ErrorCode::UnknownObject,
    ErrorCode::IndexOutOfRange,
    ErrorCode::EmptySelection,
    ErrorCode::NothingVisible,
    ErrorCode::DegeneratePose,
    ErrorCode::InvalidArgument,
    ErrorCode::InvalidTransform,
    ErrorCode::InvalidImage,
    ErrorCode::NoBackend,
    ErrorCode::BackendTimeout,
    ErrorCode::BackendError,
    ErrorCode::UnknownConfig,
    ErrorCode::NameCollision,
    ErrorCode::ReplayMismatch,
    ErrorCode::StorageFull,
    ErrorCode::Forbidden,
    ErrorCode::NotFound,
    ErrorCode::ImportFailed,
    ErrorCode::ShuttingDown,
    ErrorCode::Internal,
];

impl ErrorCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::MalformedMessage => "malformed_message",
            ErrorCode::UnsupportedVersion => "unsupported_version",
            ErrorCode::UnknownType => "unknown_type",
            ErrorCode::NoSession => "no_session",
            ErrorCode::UnknownScene => "unknown_scene",
            ErrorCode::UnknownObject => "unknown_object",
            ErrorCode::IndexOutOfRange => "index_out_of_range",
            ErrorCode::EmptySelection => "empty_selection",
            ErrorCode::NothingVisible => "nothing_visible",
            ErrorCode::DegeneratePose => "degenerate_pose",
            ErrorCode::InvalidArgument => "invalid_argument",
            ErrorCode::InvalidTransform => "invalid_transform",
            ErrorCode::InvalidImage => "invalid_image",
            ErrorCode::NoBackend => "no_backend",
            ErrorCode::BackendTimeout => "backend_timeout",
            ErrorCode::BackendError => "backend_error",
            ErrorCode::UnknownConfig => "unknown_config",
            ErrorCode::NameCollision => "name_collision",
            ErrorCode::ReplayMismatch => "replay_mismatch",
            ErrorCode::StorageFull => "storage_full",
            ErrorCode::Forbidden => "forbidden",
            ErrorCode::NotFound => "not_found",
            ErrorCode::ImportFailed => "import_failed",
            ErrorCode::ShuttingDown => "shutting_down",
            ErrorCode::Internal => "internal",
        }
    }
}

impl std::fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Body of an `error` response. `code` is kept as text so codes from other
/// peers (e.g. a worker) pass through unchanged.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

impl ErrorBody {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        ErrorBody {
            code: code.as_str().to_owned(),
            message: message.into(),
        }
    }

    pub fn is(&self, code: ErrorCode) -> bool {
        self.code == code.as_str()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneDescriptor {
    pub scene_id: String,
    /// Scene file, relative to the asset root.
    pub file: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thumbnail: Option<String>,
    #[serde(default)]
    pub meta: serde_json::Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectInfo {
    pub id: String,
    pub name: String,
    pub vertex_count: usize,
    pub triangle_count: usize,
    pub transform: Transform,
    pub original: Transform,
    #[serde(default)]
    pub label: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpenScene {
    pub scene_id: String,
    /// Reuse or name the session; a fresh id is assigned when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session_id: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionOnly {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session_id: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Select {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session_id: Option<String>,
    pub object_id: String,
    pub indices: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session_id: Option<String>,
    pub camera: CameraPose,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub padding: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifyRequest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session_id: Option<String>,
    /// PNG snapshot.
    pub image: Base64Bytes,
    pub object_id: String,
    pub vertex_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_score: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectRef {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session_id: Option<String>,
    pub object_id: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetLabel {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session_id: Option<String>,
    pub object_id: String,
    pub label: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetTransform {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session_id: Option<String>,
    pub object_id: String,
    pub transform: Transform,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Measure {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session_id: Option<String>,
    pub a: Vec3,
    pub b: Vec3,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaveConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session_id: Option<String>,
    pub name: String,
    #[serde(default)]
    pub overwrite: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoadConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session_id: Option<String>,
    pub name: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogWrite {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session_id: Option<String>,
    #[serde(flatten)]
    pub action: Action,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogQuery {
    #[serde(default)]
    pub filter: LogFilter,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GetAsset {
    /// Path relative to the asset root.
    pub path: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "body", rename_all = "snake_case")]
pub enum Request {
    Ping {},
    ListScenes {},
    OpenScene(OpenScene),
    Select(Select),
    ExpandSelection(SessionOnly),
    ShrinkSelection(SessionOnly),
    ValidateSelection(SessionOnly),
    Snapshot(Snapshot),
    Classify(ClassifyRequest),
    SetLabel(SetLabel),
    Grab(ObjectRef),
    SetTransform(SetTransform),
    Release(ObjectRef),
    RestoreOriginal(ObjectRef),
    Measure(Measure),
    SaveConfig(SaveConfig),
    LoadConfig(LoadConfig),
    LogWrite(LogWrite),
    LogQuery(LogQuery),
    GetAsset(GetAsset),
    RegisterBackend(DetectionBackendInfo),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenesBody {
    pub scenes: Vec<SceneDescriptor>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpenSceneResult {
    pub session_id: String,
    pub scene_id: String,
    pub objects: Vec<ObjectInfo>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionBody {
    pub selection: VertexSelection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidateResult {
    pub object_id: String,
    pub watertight: bool,
    pub boundary_edges: usize,
    pub non_manifold_edges: usize,
    pub induced_triangles: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotResult {
    /// PNG, RGB8.
    pub image: Base64Bytes,
    pub width: u32,
    pub height: u32,
    pub plane: ObservationPlane,
    pub selection: VertexSelection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifyResult {
    pub detections: Vec<Detection>,
    pub backend_id: String,
    pub latency_ms: u64,
    /// Label applied to the object; absent when nothing was detected.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    /// Set when the detection list is empty.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectBody {
    pub object: ObjectInfo,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureResult {
    pub a: Vec3,
    pub b: Vec3,
    pub distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigBody {
    pub config: SceneConfiguration,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntryBody {
    pub entry: LogEntry,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntriesBody {
    pub entries: Vec<LogEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssetBody {
    pub path: String,
    pub data: Base64Bytes,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegisteredBody {
    pub backend_id: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "body", rename_all = "snake_case")]
pub enum Response {
    Pong {},
    ListScenesResult(ScenesBody),
    OpenSceneResult(OpenSceneResult),
    SelectResult(SelectionBody),
    ExpandSelectionResult(SelectionBody),
    ShrinkSelectionResult(SelectionBody),
    ValidateSelectionResult(ValidateResult),
    SnapshotResult(SnapshotResult),
    ClassifyResult(ClassifyResult),
    SetLabelResult(ObjectBody),
    GrabResult(ObjectBody),
    SetTransformResult(ObjectBody),
    ReleaseResult(ObjectBody),
    RestoreOriginalResult(ObjectBody),
    MeasureResult(MeasureResult),
    SaveConfigResult(ConfigBody),
    LoadConfigResult(ConfigBody),
    LogWriteResult(EntryBody),
    LogQueryResult(EntriesBody),
    GetAssetResult(AssetBody),
    RegisterBackendResult(RegisteredBody),
    Error(ErrorBody),
}

/// `(request type, success response type)` for every request.
pub const REQUEST_RESPONSE_TABLE: [(&str, &str); 21] = [
    ("ping", "pong"),
    ("list_scenes", "list_scenes_result"),
    ("open_scene", "open_scene_result"),
    ("select", "select_result"),
    ("expand_selection", "expand_selection_result"),
    ("shrink_selection", "shrink_selection_result"),
    ("validate_selection", "validate_selection_result"),
    ("snapshot", "snapshot_result"),
    ("classify", "classify_result"),
    ("set_label", "set_label_result"),
    ("grab", "grab_result"),
    ("set_transform", "set_transform_result"),
    ("release", "release_result"),
    ("restore_original", "restore_original_result"),
    ("measure", "measure_result"),
    ("save_config", "save_config_result"),
    ("load_config", "load_config_result"),
    ("log_write", "log_write_result"),
    ("log_query", "log_query_result"),
    ("get_asset", "get_asset_result"),
    ("register_backend", "register_backend_result"),
];

pub const ERROR_TYPE: &str = "error";

pub fn is_request_type(t: &str) -> bool {
    REQUEST_RESPONSE_TABLE.iter().any(|(q, _)| *q == t)
}

pub fn is_response_type(t: &str) -> bool {
    t == ERROR_TYPE || REQUEST_RESPONSE_TABLE.iter().any(|(_, r)| *r == t)
}

impl Request {
    pub fn type_name(&self) -> &'static str {
        match self {
            Request::Ping {} => "ping",
            Request::ListScenes {} => "list_scenes",
            Request::OpenScene(_) => "open_scene",
            Request::Select(_) => "select",
            Request::ExpandSelection(_) => "expand_selection",
            Request::ShrinkSelection(_) => "shrink_selection",
            Request::ValidateSelection(_) => "validate_selection",
            Request::Snapshot(_) => "snapshot",
            Request::Classify(_) => "classify",
            Request::SetLabel(_) => "set_label",
            Request::Grab(_) => "grab",
            Request::SetTransform(_) => "set_transform",
            Request::Release(_) => "release",
            Request::RestoreOriginal(_) => "restore_original",
            Request::Measure(_) => "measure",
            Request::SaveConfig(_) => "save_config",
            Request::LoadConfig(_) => "load_config",
            Request::LogWrite(_) => "log_write",
            Request::LogQuery(_) => "log_query",
            Request::GetAsset(_) => "get_asset",
            Request::RegisterBackend(_) => "register_backend",
        }
    }

    /// The one success response type for this request.
    pub fn response_type(&self) -> &'static str {
        response_type_for(self.type_name()).expect("every request type is in the table")
    }

    /// Explicit session id carried by the request, if any.
    pub fn session_id(&self) -> Option<&str> {
        match self {
            Request::OpenScene(b) => b.session_id.as_deref(),
            Request::Select(b) => b.session_id.as_deref(),
            Request::ExpandSelection(b) | Request::ShrinkSelection(b) | Request::ValidateSelection(b) => b.session_id.as_deref(),
            Request::Snapshot(b) => b.session_id.as_deref(),
            Request::Classify(b) => b.session_id.as_deref(),
            Request::SetLabel(b) => b.session_id.as_deref(),
            Request::Grab(b) | Request::Release(b) | Request::RestoreOriginal(b) => b.session_id.as_deref(),
            Request::SetTransform(b) => b.session_id.as_deref(),
            Request::Measure(b) => b.session_id.as_deref(),
            Request::SaveConfig(b) => b.session_id.as_deref(),
            Request::LoadConfig(b) => b.session_id.as_deref(),
            Request::LogWrite(b) => b.session_id.as_deref(),
            Request::Ping {} | Request::ListScenes {} | Request::LogQuery(_) | Request::GetAsset(_) | Request::RegisterBackend(_) => None,
        }
    }
}

pub fn response_type_for(request_type: &str) -> Option<&'static str> {
    REQUEST_RESPONSE_TABLE
        .iter()
        .find(|(q, _)| *q == request_type)
        .map(|(_, r)| *r)
}

impl Response {
    pub fn type_name(&self) -> &'static str {
        match self {
            Response::Pong {} => "pong",
            Response::ListScenesResult(_) => "list_scenes_result",
            Response::OpenSceneResult(_) => "open_scene_result",
            Response::SelectResult(_) => "select_result",
            Response::ExpandSelectionResult(_) => "expand_selection_result",
            Response::ShrinkSelectionResult(_) => "shrink_selection_result",
            Response::ValidateSelectionResult(_) => "validate_selection_result",
            Response::SnapshotResult(_) => "snapshot_result",
            Response::ClassifyResult(_) => "classify_result",
            Response::SetLabelResult(_) => "set_label_result",
            Response::GrabResult(_) => "grab_result",
            Response::SetTransformResult(_) => "set_transform_result",
            Response::ReleaseResult(_) => "release_result",
            Response::RestoreOriginalResult(_) => "restore_original_result",
            Response::MeasureResult(_) => "measure_result",
            Response::SaveConfigResult(_) => "save_config_result",
            Response::LoadConfigResult(_) => "load_config_result",
            Response::LogWriteResult(_) => "log_write_result",
            Response::LogQueryResult(_) => "log_query_result",
            Response::GetAssetResult(_) => "get_asset_result",
            Response::RegisterBackendResult(_) => "register_backend_result",
            Response::Error(_) => ERROR_TYPE,
        }
    }

    pub fn error(code: ErrorCode, message: impl Into<String>) -> Response {
        Response::Error(ErrorBody::new(code, message))
    }

    pub fn as_error(&self) -> Option<&ErrorBody> {
        match self {
            Response::Error(e) => Some(e),
            _ => None,
        }
    }
}
