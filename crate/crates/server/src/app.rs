//! Shared server state and the request dispatch table.

use std::collections::{BTreeSet, HashMap};
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use scenelab_core::import::ImportError;
use scenelab_core::raster::DEFAULT_PADDING;
use scenelab_core::{
    expand_selection, load_scene_with_id, observation_plane, render_snapshot, shrink_selection, validate_selection,
    Scene, SceneError, SceneObject, SelectionError, VertexSelection,
};
use scenelab_detection::{
    detect, sha256_hex, top_detection, DetectionBackend, DetectionError, StubManifest, DEFAULT_MIN_SCORE,
    NO_DETECTION_WARNING,
};
use scenelab_logbook::store::now_ms;
use scenelab_logbook::{replay_log, Action, LogFilter, LogStore, LogbookError, Measurement, SceneConfiguration};
use scenelab_protocol::messages::*;
use scenelab_protocol::{Request, Response};
use tokio::sync::mpsc;

use crate::backends::{BackendRegistry, RemoteBackend};
use crate::catalog::{AssetCatalog, AssetError, CatalogEntry};

/// Largest asset served in one message; base64 growth keeps it under the frame cap.
pub const MAX_ASSET_BYTES: u64 = 12 * 1024 * 1024;

#[derive(Clone, Debug)]
pub struct ServerConfig {
    pub tcp_addr: std::net::SocketAddr,
    pub ws_addr: std::net::SocketAddr,
    pub assets: PathBuf,
    pub log_dir: PathBuf,
    /// Static viewer files served at `/`; a placeholder page when unset.
    pub viewer_dir: Option<PathBuf>,
    /// Registers an in-process stub backend at startup.
    pub stub: Option<StubManifest>,
    pub classify_timeout: Duration,
    pub min_score: f64,
    pub log_max_bytes: Option<u64>,
}

impl ServerConfig {
    pub fn new(assets: impl Into<PathBuf>, log_dir: impl Into<PathBuf>) -> Self {
        ServerConfig {
            tcp_addr: ([127, 0, 0, 1], scenelab_protocol::DEFAULT_TCP_PORT).into(),
            ws_addr: ([127, 0, 0, 1], scenelab_protocol::DEFAULT_WS_PORT).into(),
            assets: assets.into(),
            log_dir: log_dir.into(),
            viewer_dir: None,
            stub: None,
            classify_timeout: scenelab_detection::DEFAULT_TIMEOUT,
            min_score: DEFAULT_MIN_SCORE,
            log_max_bytes: None,
        }
    }

    /// Both listeners on ephemeral localhost ports.
    pub fn ephemeral(mut self) -> Self {
        self.tcp_addr = ([127, 0, 0, 1], 0).into();
        self.ws_addr = ([127, 0, 0, 1], 0).into();
        self
    }
}

pub struct Session {
    pub id: String,
    pub scene: Scene,
    pub selection: Option<VertexSelection>,
    pub measurements: Vec<Measurement>,
    pub grabbed: BTreeSet<String>,
}

/// Per-connection state.
pub struct ConnCtx {
    pub id: u64,
    bound: Mutex<Option<String>>,
    out: mpsc::Sender<String>,
    backend: Mutex<Option<Arc<RemoteBackend>>>,
}

impl ConnCtx {
    pub fn new(id: u64, out: mpsc::Sender<String>) -> Self {
        ConnCtx {
            id,
            bound: Mutex::new(None),
            out,
            backend: Mutex::new(None),
        }
    }

    pub fn bound_session(&self) -> Option<String> {
        self.bound.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }

    fn bind(&self, session: &str) {
        *self.bound.lock().unwrap_or_else(|e| e.into_inner()) = Some(session.to_owned());
    }

    pub fn backend(&self) -> Option<Arc<RemoteBackend>> {
        self.backend.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }
}

/// An error response on its way out of a handler.
pub struct Fail(pub ErrorBody);

fn fail(code: ErrorCode, message: impl Into<String>) -> Fail {
    Fail(ErrorBody::new(code, message))
}

impl From<SceneError> for Fail {
    fn from(e: SceneError) -> Self {
        let code = match e {
            SceneError::UnknownObject(_) => ErrorCode::UnknownObject,
            SceneError::InvalidTransform(_) => ErrorCode::InvalidTransform,
            _ => ErrorCode::InvalidArgument,
        };
        fail(code, e.to_string())
    }
}

impl From<SelectionError> for Fail {
    fn from(e: SelectionError) -> Self {
        let code = match e {
            SelectionError::IndexOutOfRange { .. } => ErrorCode::IndexOutOfRange,
            SelectionError::EmptySelection => ErrorCode::EmptySelection,
            SelectionError::DegeneratePose(_) => ErrorCode::DegeneratePose,
            SelectionError::NothingVisible => ErrorCode::NothingVisible,
            SelectionError::UnknownObject(_) => ErrorCode::UnknownObject,
            SelectionError::NonFiniteInput | SelectionError::InvalidCamera(_) | SelectionError::InvalidPadding(_) => {
                ErrorCode::InvalidArgument
            }
        };
        fail(code, e.to_string())
    }
}

impl From<LogbookError> for Fail {
    fn from(e: LogbookError) -> Self {
        let code = match e {
            LogbookError::StorageFull { .. } => ErrorCode::StorageFull,
            LogbookError::Serialization(_) | LogbookError::InvalidName(_) => ErrorCode::InvalidArgument,
            LogbookError::UnknownConfig(_) => ErrorCode::UnknownConfig,
            LogbookError::NameCollision(_) => ErrorCode::NameCollision,
            LogbookError::ReplayMismatch { .. } => ErrorCode::ReplayMismatch,
            LogbookError::UnknownSession(_) => ErrorCode::NoSession,
            _ => ErrorCode::Internal,
        };
        fail(code, e.to_string())
    }
}

impl From<DetectionError> for Fail {
    fn from(e: DetectionError) -> Self {
        let code = match e {
            DetectionError::BackendUnavailable(_) => ErrorCode::NoBackend,
            DetectionError::InvalidImage(_) => ErrorCode::InvalidImage,
            DetectionError::Timeout(_) => ErrorCode::BackendTimeout,
            DetectionError::BackendProtocol(_) => ErrorCode::BackendError,
            DetectionError::InvalidMinScore(_) => ErrorCode::InvalidArgument,
            DetectionError::InvalidManifest(_) => ErrorCode::Internal,
        };
        fail(code, e.to_string())
    }
}

impl From<AssetError> for Fail {
    fn from(e: AssetError) -> Self {
        let code = match e {
            AssetError::Forbidden(_) => ErrorCode::Forbidden,
            AssetError::NotFound(_) => ErrorCode::NotFound,
            AssetError::Io(_) => ErrorCode::Internal,
        };
        fail(code, e.to_string())
    }
}

impl From<ImportError> for Fail {
    fn from(e: ImportError) -> Self {
        fail(ErrorCode::ImportFailed, e.to_string())
    }
}

type Handled = Result<Response, Fail>;
type SessionRef = Arc<tokio::sync::Mutex<Session>>;

pub struct App {
    pub config: ServerConfig,
    pub catalog: AssetCatalog,
    pub store: LogStore,
    pub backends: BackendRegistry,
    sessions: Mutex<HashMap<String, SessionRef>>,
    scenes: Mutex<HashMap<String, Arc<Scene>>>,
    counter: AtomicU64,
}

pub fn object_info(o: &SceneObject) -> ObjectInfo {
    ObjectInfo {
        id: o.id().to_owned(),
        name: o.name().to_owned(),
        vertex_count: o.mesh().vertex_count(),
        triangle_count: o.mesh().triangle_count(),
        transform: *o.current(),
        original: *o.original(),
        label: o.label().map(str::to_owned),
    }
}

fn object_body(scene: &Scene, id: &str) -> Result<ObjectBody, Fail> {
    Ok(ObjectBody {
        object: object_info(scene.object(id)?),
    })
}

impl App {
    pub fn new(config: ServerConfig, catalog: AssetCatalog, store: LogStore) -> Self {
        App {
            config,
            catalog,
            store,
            backends: BackendRegistry::default(),
            sessions: Mutex::default(),
            scenes: Mutex::default(),
            counter: AtomicU64::new(1),
        }
    }

    pub fn session_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.sessions.lock().unwrap_or_else(|e| e.into_inner()).keys().cloned().collect();
        ids.sort();
        ids
    }

    fn new_session_id(&self) -> String {
        format!("s{:x}-{}", now_ms(), self.counter.fetch_add(1, Ordering::Relaxed))
    }

    fn session(&self, conn: &ConnCtx, explicit: Option<&str>) -> Result<(String, SessionRef), Fail> {
        let id = match explicit {
            Some(id) => id.to_owned(),
            None => conn
                .bound_session()
                .ok_or_else(|| fail(ErrorCode::NoSession, "no scene opened on this connection"))?,
        };
        let sessions = self.sessions.lock().unwrap_or_else(|e| e.into_inner());
        let s = sessions
            .get(&id)
            .cloned()
            .ok_or_else(|| fail(ErrorCode::NoSession, format!("unknown session `{id}`")))?;
        Ok((id, s))
    }

    fn scene_template(&self, entry: &CatalogEntry) -> Result<Arc<Scene>, Fail> {
        if let Some(s) = self.scenes.lock().unwrap_or_else(|e| e.into_inner()).get(&entry.scene_id) {
            return Ok(s.clone());
        }
        let scene = Arc::new(load_scene_with_id(&entry.scene_file, &entry.scene_id, entry.unit_scale())?);
        self.scenes
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .insert(entry.scene_id.clone(), scene.clone());
        Ok(scene)
    }

    fn log(&self, session: &str, action: Action) -> Result<scenelab_logbook::LogEntry, Fail> {
        Ok(self.store.append(session, action)?)
    }

    /// Answers one request. Never panics on bad input; failures become `error` responses.
    pub async fn handle(&self, conn: &ConnCtx, req: Request) -> Response {
        let expected = req.response_type();
        match self.dispatch(conn, req).await {
            Ok(r) => {
                debug_assert_eq!(r.type_name(), expected);
                r
            }
            Err(Fail(e)) => Response::Error(e),
        }
    }

    async fn dispatch(&self, conn: &ConnCtx, req: Request) -> Handled {
        match req {
            Request::Ping {} => Ok(Response::Pong {}),
            Request::ListScenes {} => Ok(Response::ListScenesResult(ScenesBody {
                scenes: self.catalog.descriptors(),
            })),
            Request::OpenScene(b) => self.open_scene(conn, b),
            Request::Select(b) => {
                let (sid, s) = self.session(conn, b.session_id.as_deref())?;
                let mut s = s.lock().await;
                let sel = VertexSelection::new(b.object_id, b.indices);
                sel.check(s.scene.object(&sel.object_id)?.mesh())?;
                self.log(
                    &sid,
                    Action::Select {
                        object_id: sel.object_id.clone(),
                        indices: sel.indices.iter().copied().collect(),
                    },
                )?;
                s.selection = Some(sel.clone());
                Ok(Response::SelectResult(SelectionBody { selection: sel }))
            }
            Request::ExpandSelection(b) => self.refine(conn, b, true).await,
            Request::ShrinkSelection(b) => self.refine(conn, b, false).await,
            Request::ValidateSelection(b) => {
                let (_, s) = self.session(conn, b.session_id.as_deref())?;
                let s = s.lock().await;
                let sel = active_selection(&s)?;
                let report = validate_selection(s.scene.object(&sel.object_id)?.mesh(), sel)?;
                Ok(Response::ValidateSelectionResult(ValidateResult {
                    object_id: sel.object_id.clone(),
                    watertight: report.watertight,
                    boundary_edges: report.boundary_edges,
                    non_manifold_edges: report.non_manifold_edges,
                    induced_triangles: report.induced_triangles(),
                }))
            }
            Request::Snapshot(b) => {
                let (_, s) = self.session(conn, b.session_id.as_deref())?;
                let s = s.lock().await;
                let sel = active_selection(&s)?;
                let obj = s.scene.object(&sel.object_id)?;
                let snap = render_snapshot(&s.scene, &b.camera, sel, b.padding.unwrap_or(DEFAULT_PADDING))?;
                let plane = observation_plane(&b.camera, obj.mesh(), obj.current(), sel)?;
                Ok(Response::SnapshotResult(SnapshotResult {
                    image: snap.to_png().into(),
                    width: snap.width,
                    height: snap.height,
                    plane,
                    selection: sel.clone(),
                }))
            }
            Request::Classify(b) => self.classify(conn, b).await,
            Request::SetLabel(b) => {
                let (sid, s) = self.session(conn, b.session_id.as_deref())?;
                let mut s = s.lock().await;
                s.scene.object(&b.object_id)?;
                self.log(
                    &sid,
                    Action::Label {
                        object_id: b.object_id.clone(),
                        label: b.label.clone(),
                    },
                )?;
                s.scene.set_label(&b.object_id, b.label)?;
                object_body(&s.scene, &b.object_id).map(Response::SetLabelResult)
            }
            Request::Grab(b) => {
                let (sid, s) = self.session(conn, b.session_id.as_deref())?;
                let mut s = s.lock().await;
                s.scene.object(&b.object_id)?;
                self.log(&sid, Action::Grab { object_id: b.object_id.clone() })?;
                s.grabbed.insert(b.object_id.clone());
                object_body(&s.scene, &b.object_id).map(Response::GrabResult)
            }
            Request::SetTransform(b) => {
                let (sid, s) = self.session(conn, b.session_id.as_deref())?;
                let mut s = s.lock().await;
                s.scene.object(&b.object_id)?;
                b.transform.validate().map_err(SceneError::from)?;
                self.log(
                    &sid,
                    Action::Move {
                        object_id: b.object_id.clone(),
                        transform: b.transform,
                    },
                )?;
                s.scene.set_transform(&b.object_id, b.transform)?;
                object_body(&s.scene, &b.object_id).map(Response::SetTransformResult)
            }
            Request::Release(b) => {
                let (sid, s) = self.session(conn, b.session_id.as_deref())?;
                let mut s = s.lock().await;
                let current = *s.scene.object(&b.object_id)?.current();
                self.log(
                    &sid,
                    Action::Release {
                        object_id: b.object_id.clone(),
                        transform: Some(current),
                    },
                )?;
                s.grabbed.remove(&b.object_id);
                object_body(&s.scene, &b.object_id).map(Response::ReleaseResult)
            }
            Request::RestoreOriginal(b) => {
                let (sid, s) = self.session(conn, b.session_id.as_deref())?;
                let mut s = s.lock().await;
                s.scene.object(&b.object_id)?;
                self.log(&sid, Action::Restore { object_id: b.object_id.clone() })?;
                s.scene.restore_original(&b.object_id)?;
                object_body(&s.scene, &b.object_id).map(Response::RestoreOriginalResult)
            }
            Request::Measure(b) => {
                let (sid, s) = self.session(conn, b.session_id.as_deref())?;
                let mut s = s.lock().await;
                let m = Measurement::between(b.a, b.b)
                    .ok_or_else(|| fail(ErrorCode::InvalidArgument, "measurement endpoints must be finite"))?;
                self.log(&sid, Action::Measure(m))?;
                s.measurements.push(m);
                Ok(Response::MeasureResult(MeasureResult {
                    a: m.a,
                    b: m.b,
                    distance: m.distance,
                }))
            }
            Request::SaveConfig(b) => {
                let (sid, s) = self.session(conn, b.session_id.as_deref())?;
                let s = s.lock().await;
                let config = SceneConfiguration::from_scene(&s.scene, &s.measurements, b.name.clone(), now_ms());
                self.store.save_config(&config, b.overwrite)?;
                self.log(
                    &sid,
                    Action::SaveConfig {
                        name: b.name,
                        config: config.clone(),
                    },
                )?;
                Ok(Response::SaveConfigResult(ConfigBody { config }))
            }
            Request::LoadConfig(b) => {
                let (sid, s) = self.session(conn, b.session_id.as_deref())?;
                let mut s = s.lock().await;
                let config = self.store.load_config(&b.name)?;
                if config.scene_id != s.scene.scene_id() {
                    return Err(fail(
                        ErrorCode::InvalidArgument,
                        format!("configuration `{}` belongs to scene `{}`", b.name, config.scene_id),
                    ));
                }
                for o in &config.objects {
                    s.scene.object(&o.id)?;
                    o.transform.validate().map_err(SceneError::from)?;
                }
                self.log(
                    &sid,
                    Action::LoadConfig {
                        name: b.name,
                        config: config.clone(),
                    },
                )?;
                apply_config(&mut s, &config)?;
                Ok(Response::LoadConfigResult(ConfigBody { config }))
            }
            Request::LogWrite(b) => {
                let (sid, s) = self.session(conn, b.session_id.as_deref())?;
                let s = s.lock().await;
                match &b.action {
                    Action::Select { object_id, indices }
                    | Action::Expand { object_id, indices }
                    | Action::Shrink { object_id, indices } => {
                        VertexSelection::new(object_id.clone(), indices.iter().copied())
                            .check(s.scene.object(object_id)?.mesh())?;
                    }
                    Action::Grab { object_id } => {
                        s.scene.object(object_id)?;
                    }
                    other => {
                        return Err(fail(
                            ErrorCode::InvalidArgument,
                            format!("`{}` entries are written by the server; use the dedicated request", other.name()),
                        ))
                    }
                }
                let entry = self.log(&sid, b.action)?;
                Ok(Response::LogWriteResult(EntryBody { entry }))
            }
            Request::LogQuery(b) => Ok(Response::LogQueryResult(EntriesBody {
                entries: self.store.query(&b.filter),
            })),
            Request::GetAsset(b) => {
                let path = self.catalog.resolve(&b.path)?;
                let size = std::fs::metadata(&path).map_err(AssetError::from)?.len();
                if size > MAX_ASSET_BYTES {
                    return Err(fail(
                        ErrorCode::InvalidArgument,
                        format!("asset is {size} bytes, over the {MAX_ASSET_BYTES}-byte message limit"),
                    ));
                }
                let data = tokio::fs::read(&path).await.map_err(AssetError::from)?;
                Ok(Response::GetAssetResult(AssetBody {
                    path: b.path,
                    data: data.into(),
                }))
            }
            Request::RegisterBackend(info) => {
                info.validate().map_err(|m| fail(ErrorCode::InvalidArgument, m))?;
                let backend = Arc::new(RemoteBackend::new(info, conn.out.clone()));
                let previous = conn.backend.lock().unwrap_or_else(|e| e.into_inner()).replace(backend.clone());
                if let Some(p) = previous {
                    self.backends.unregister(&(p as Arc<dyn DetectionBackend>));
                }
                let id = backend.info().backend_id.clone();
                self.backends.register(backend);
                tracing::info!(backend = %id, conn = conn.id, "backend registered");
                Ok(Response::RegisterBackendResult(RegisteredBody { backend_id: id }))
            }
        }
    }

    fn open_scene(&self, conn: &ConnCtx, b: OpenScene) -> Handled {
        let entry = self
            .catalog
            .get(&b.scene_id)
            .ok_or_else(|| fail(ErrorCode::UnknownScene, format!("unknown scene `{}`", b.scene_id)))?;
        let template = self.scene_template(entry)?;
        let sid = b.session_id.unwrap_or_else(|| self.new_session_id());
        let live = self.sessions.lock().unwrap_or_else(|e| e.into_inner()).contains_key(&sid);

        let mut session = Session {
            id: sid.clone(),
            scene: (*template).clone(),
            selection: None,
            measurements: Vec::new(),
            grabbed: BTreeSet::new(),
        };
        // a session known only from the log (e.g. after a restart) resumes where it stopped
        let history = if live {
            Vec::new()
        } else {
            self.store.query(&LogFilter::session(sid.clone()))
        };
        let resumed = match history.is_empty() {
            true => None,
            false => Some(replay_log(&history)?).filter(|c| c.scene_id == b.scene_id),
        };
        match resumed {
            Some(config) => apply_config(&mut session, &config)?,
            None => {
                self.log(
                    &sid,
                    Action::SceneOpen {
                        scene_id: b.scene_id.clone(),
                        objects: SceneConfiguration::pristine(&template).objects,
                    },
                )?;
            }
        }
        let objects = session.scene.objects().iter().map(object_info).collect();
        self.sessions
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .insert(sid.clone(), Arc::new(tokio::sync::Mutex::new(session)));
        conn.bind(&sid);
        Ok(Response::OpenSceneResult(OpenSceneResult {
            session_id: sid,
            scene_id: b.scene_id,
            objects,
        }))
    }

    async fn refine(&self, conn: &ConnCtx, b: SessionOnly, grow: bool) -> Handled {
        let (sid, s) = self.session(conn, b.session_id.as_deref())?;
        let mut s = s.lock().await;
        let sel = active_selection(&s)?;
        let mesh = s.scene.object(&sel.object_id)?.mesh();
        let next = if grow {
            expand_selection(mesh, sel)?
        } else {
            shrink_selection(mesh, sel)?
        };
        let (object_id, indices) = (next.object_id.clone(), next.indices.iter().copied().collect());
        self.log(
            &sid,
            if grow {
                Action::Expand { object_id, indices }
            } else {
                Action::Shrink { object_id, indices }
            },
        )?;
        s.selection = Some(next.clone());
        let body = SelectionBody { selection: next };
        Ok(if grow {
            Response::ExpandSelectionResult(body)
        } else {
            Response::ShrinkSelectionResult(body)
        })
    }

    async fn classify(&self, conn: &ConnCtx, b: ClassifyRequest) -> Handled {
        let (sid, s) = self.session(conn, b.session_id.as_deref())?;
        let mut s = s.lock().await;
        s.scene.object(&b.object_id)?;
        let min_score = b.min_score.unwrap_or(self.config.min_score);
        if !(0.0..=1.0).contains(&min_score) {
            return Err(DetectionError::InvalidMinScore(min_score).into());
        }
        self.log(
            &sid,
            Action::ClassifyRequest {
                object_id: b.object_id.clone(),
                vertex_count: b.vertex_count,
                image_sha256: sha256_hex(&b.image.0),
            },
        )?;
        let backend = self
            .backends
            .current()
            .ok_or_else(|| fail(ErrorCode::NoBackend, "no detection backend is registered"))?;
        let out = detect(backend.as_ref(), &b.image.0, min_score, self.config.classify_timeout).await?;
        let label = top_detection(&out.detections).map(|d| d.class_name.clone());
        self.log(
            &sid,
            Action::ClassifyResult {
                object_id: b.object_id.clone(),
                backend_id: out.backend_id.clone(),
                detections: out.detections.clone(),
                latency_ms: out.latency_ms,
                label: label.clone(),
            },
        )?;
        if label.is_some() {
            s.scene.set_label(&b.object_id, label.clone())?;
        }
        Ok(Response::ClassifyResult(ClassifyResult {
            warning: out.detections.is_empty().then(|| NO_DETECTION_WARNING.to_owned()),
            detections: out.detections,
            backend_id: out.backend_id,
            latency_ms: out.latency_ms,
            label,
        }))
    }

    /// Called when a connection ends: a worker registered on it goes away.
    pub fn disconnect(&self, conn: &ConnCtx) {
        if let Some(b) = conn.backend.lock().unwrap_or_else(|e| e.into_inner()).take() {
            b.disconnect();
            tracing::info!(backend = %b.info().backend_id, conn = conn.id, "backend disconnected");
            self.backends.unregister(&(b as Arc<dyn DetectionBackend>));
        }
    }
}

fn active_selection(s: &Session) -> Result<&VertexSelection, Fail> {
    s.selection
        .as_ref()
        .ok_or_else(|| fail(ErrorCode::EmptySelection, "no active selection in this session"))
}

fn apply_config(s: &mut Session, config: &SceneConfiguration) -> Result<(), Fail> {
    for o in &config.objects {
        s.scene.set_transform(&o.id, o.transform)?;
        s.scene.set_label(&o.id, o.label.clone())?;
    }
    s.measurements = config.measurements.clone();
    Ok(())
}
