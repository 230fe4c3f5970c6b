//! In-process HTTP server speaking the backend wire protocol.
//!
//! Runs on its own tokio runtime in a background thread so the blocking
//! client under test can call it from ordinary `#[test]` functions. Masks
//! are encoded and decoded here with an independent RLE codec.

use std::collections::{HashMap, VecDeque};
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};

use axum::extract::{DefaultBodyLimit, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::{Json, Router};
use image::Rgb;

use sceneaug_core::backends::wire::*;
use sceneaug_core::imageio::{png_from_base64, png_to_base64};

/// Row-major runs, first run counts unset cells.
pub fn oracle_rle_encode(bits: &[bool]) -> Vec<u32> {
    let mut runs = Vec::new();
    let mut current = false;
    let mut count = 0u32;
    for &b in bits {
        if b == current {
            count += 1;
        } else {
            runs.push(count);
            current = b;
            count = 1;
        }
    }
    runs.push(count);
    runs
}

pub fn oracle_rle_decode(runs: &[u32]) -> Vec<bool> {
    let mut bits = Vec::new();
    for (i, &r) in runs.iter().enumerate() {
        bits.extend(std::iter::repeat_n(i % 2 == 1, r as usize));
    }
    bits
}

pub const PROMPTED_FILL: [u8; 3] = [255, 0, 255];
pub const PLAIN_FILL: [u8; 3] = [255, 255, 255];

#[derive(Default)]
pub struct MockState {
    attempts: Mutex<HashMap<String, usize>>,
    failures: Mutex<HashMap<String, (u16, usize)>>,
    pub detections: Mutex<Vec<WireObject>>,
    /// Masks the segmenter hands out, one per requested box, in order.
    pub queued_masks: Mutex<VecDeque<Vec<bool>>>,
    pub received_masks: Mutex<Vec<Vec<bool>>>,
    pub prompts: Mutex<Vec<String>>,
    pub suggestion: Mutex<Option<SuggestResponse>>,
}

impl MockState {
    /// Count the attempt and decide whether to fail it.
    fn gate(&self, path: &str) -> Option<Response> {
        *self
            .attempts
            .lock()
            .unwrap()
            .entry(path.to_string())
            .or_default() += 1;
        let mut failures = self.failures.lock().unwrap();
        let entry = failures.get_mut(path)?;
        if entry.1 == 0 {
            return None;
        }
        entry.1 -= 1;
        Some(error(entry.0, "injected", "injected failure"))
    }
}

fn error(status: u16, code: &str, message: &str) -> Response {
    let body = ErrorBody {
        error: ErrorDetail {
            code: code.into(),
            message: message.into(),
        },
    };
    (StatusCode::from_u16(status).unwrap(), Json(body)).into_response()
}

type Shared = State<Arc<MockState>>;

async fn detect(State(s): Shared, Json(req): Json<DetectRequest>) -> Response {
    if let Some(r) = s.gate(DETECT_PATH) {
        return r;
    }
    if png_from_base64(&req.image).is_err() {
        return error(400, "bad_image", "image is not a base64 PNG");
    }
    Json(DetectResponse {
        objects: s.detections.lock().unwrap().clone(),
    })
    .into_response()
}

async fn segment(State(s): Shared, Json(req): Json<SegmentRequest>) -> Response {
    if let Some(r) = s.gate(SEGMENT_PATH) {
        return r;
    }
    let Ok(img) = png_from_base64(&req.image) else {
        return error(400, "bad_image", "image is not a base64 PNG");
    };
    let (w, h) = img.dimensions();
    let mut queue = s.queued_masks.lock().unwrap();
    let masks = req
        .boxes
        .iter()
        .map(|b| {
            let bits = queue.pop_front().unwrap_or_else(|| {
                (0..h)
                    .flat_map(|y| (0..w).map(move |x| (x, y)))
                    .map(|(x, y)| x >= b.x && x < b.x + b.w && y >= b.y && y < b.y + b.h)
                    .collect()
            });
            WireMask {
                rle: oracle_rle_encode(&bits),
                score: 0.9,
            }
        })
        .collect();
    Json(SegmentResponse { masks }).into_response()
}

/// Fills masked pixels with a fixed colour and, to exercise client-side
/// compositing, blackens every pixel outside the mask.
async fn inpaint(State(s): Shared, Json(req): Json<InpaintRequest>) -> Response {
    if let Some(r) = s.gate(INPAINT_PATH) {
        return r;
    }
    let Ok(mut img) = png_from_base64(&req.image) else {
        return error(400, "bad_image", "image is not a base64 PNG");
    };
    let bits = oracle_rle_decode(&req.mask_rle);
    let (w, h) = img.dimensions();
    if bits.len() != (w * h) as usize {
        return error(400, "bad_mask", "mask length does not match image");
    }
    let fill = match &req.prompt {
        Some(p) => {
            s.prompts.lock().unwrap().push(p.clone());
            PROMPTED_FILL
        }
        None => PLAIN_FILL,
    };
    for (i, px) in img.pixels_mut().enumerate() {
        *px = if bits[i] { Rgb(fill) } else { Rgb([0, 0, 0]) };
    }
    s.received_masks.lock().unwrap().push(bits);
    Json(InpaintResponse {
        image: png_to_base64(&img).unwrap(),
    })
    .into_response()
}

async fn suggest(State(s): Shared, Json(req): Json<SuggestRequest>) -> Response {
    if let Some(r) = s.gate(SUGGEST_PATH) {
        return r;
    }
    match s.suggestion.lock().unwrap().clone() {
        Some(resp) => Json(resp).into_response(),
        None => error(404, "unknown_label", &req.label),
    }
}

/// Mean R, G, B of each image, scaled to `[0, 1]`.
async fn embed(State(s): Shared, Json(req): Json<EmbedRequest>) -> Response {
    if let Some(r) = s.gate(EMBED_PATH) {
        return r;
    }
    let mut features = Vec::new();
    for text in &req.images {
        let Ok(img) = png_from_base64(text) else {
            return error(400, "bad_image", "image is not a base64 PNG");
        };
        let n = (img.width() * img.height()) as f64;
        let mut sum = [0.0; 3];
        for p in img.pixels() {
            for (s, v) in sum.iter_mut().zip(p.0) {
                *s += v as f64;
            }
        }
        features.push(sum.iter().map(|s| s / n / 255.0).collect());
    }
    Json(EmbedResponse { features }).into_response()
}

pub struct MockServer {
    pub addr: SocketAddr,
    pub state: Arc<MockState>,
}

impl MockServer {
    pub fn start() -> Self {
        let state = Arc::new(MockState::default());
        let app = Router::new()
            .route(DETECT_PATH, post(detect))
            .route(SEGMENT_PATH, post(segment))
            .route(INPAINT_PATH, post(inpaint))
            .route(SUGGEST_PATH, post(suggest))
            .route(EMBED_PATH, post(embed))
            .layer(DefaultBodyLimit::disable())
            .with_state(state.clone());
        let (tx, rx) = std::sync::mpsc::channel();
        std::thread::spawn(move || {
            let rt = tokio::runtime::Builder::new_multi_thread()
                .worker_threads(2)
                .enable_all()
                .build()
                .unwrap();
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
                tx.send(listener.local_addr().unwrap()).unwrap();
                axum::serve(listener, app).await.unwrap();
            });
        });
        let addr = rx.recv().expect("mock server failed to start");
        Self { addr, state }
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn attempts(&self, path: &str) -> usize {
        self.state
            .attempts
            .lock()
            .unwrap()
            .get(path)
            .copied()
            .unwrap_or(0)
    }

    /// Fail the next `times` requests to `path` with `status`.
    pub fn fail_next(&self, path: &str, status: u16, times: usize) {
        self.state
            .failures
            .lock()
            .unwrap()
            .insert(path.to_string(), (status, times));
    }
}
