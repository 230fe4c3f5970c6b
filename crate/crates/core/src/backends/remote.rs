//! Blocking HTTP client for the backend protocol in [`super::wire`].

use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::Duration;

use image::RgbImage;
use serde::de::DeserializeOwned;
use serde::Serialize;

use super::wire::*;
use super::{
    composite_masked, BackendDescriptor, BackendError, BackendKind, Detector, FeatureExtractor,
    MaskInpainter, ObjectSuggester, PromptedInpainter, Segmenter, Suggestion,
    REMOTE_IMPLEMENTATION_ID,
};
use crate::imageio::{png_from_base64, png_to_base64};
use crate::mask::{BBox, BinaryMask};
use crate::scene::DetectedObject;

const MAX_RESPONSE_BYTES: u64 = 256 * 1024 * 1024;

/// Exponential backoff between attempts of an idempotent request.
#[derive(Clone, Debug, PartialEq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub factor: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            base_delay: Duration::from_millis(500),
            factor: 2.0,
        }
    }
}

impl RetryPolicy {
    /// Wait after the `failed_attempt`-th (1-based) failure.
    pub fn delay_after(&self, failed_attempt: u32) -> Duration {
        self.base_delay
            .mul_f64(self.factor.powi(failed_attempt.saturating_sub(1) as i32))
    }

    /// Every wait a fully failing request goes through.
    pub fn schedule(&self) -> Vec<Duration> {
        (1..self.max_attempts).map(|k| self.delay_after(k)).collect()
    }
}

#[derive(Clone, Debug)]
pub struct RemoteConfig {
    /// Base URL, e.g. `http://127.0.0.1:8080`; routes are appended.
    pub endpoint: String,
    pub version: String,
    pub retry: RetryPolicy,
    pub timeout: Duration,
    pub max_in_flight: usize,
    /// Detections scoring below this are discarded.
    pub min_score: f64,
}

impl RemoteConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            version: "v1".to_string(),
            retry: RetryPolicy::default(),
            timeout: Duration::from_secs(120),
            max_in_flight: 4,
            min_score: 0.3,
        }
    }
}

/// Counting gate bounding concurrent requests per client.
#[derive(Debug)]
struct InFlightGate {
    cap: usize,
    active: Mutex<usize>,
    freed: Condvar,
}

struct GateTicket<'a>(&'a InFlightGate);

impl InFlightGate {
    fn new(cap: usize) -> Self {
        Self {
            cap: cap.max(1),
            active: Mutex::new(0),
            freed: Condvar::new(),
        }
    }

    fn enter(&self) -> GateTicket<'_> {
        let mut active = self.active.lock().unwrap_or_else(|e| e.into_inner());
        while *active >= self.cap {
            active = self.freed.wait(active).unwrap_or_else(|e| e.into_inner());
        }
        *active += 1;
        GateTicket(self)
    }
}

impl Drop for GateTicket<'_> {
    fn drop(&mut self) {
        let mut active = self.0.active.lock().unwrap_or_else(|e| e.into_inner());
        *active -= 1;
        self.0.freed.notify_one();
    }
}

/// One client serves every backend role; each trait impl reports its own
/// [`BackendKind`] in the descriptor.
pub struct RemoteBackend {
    config: RemoteConfig,
    agent: ureq::Agent,
    gate: InFlightGate,
}

impl RemoteBackend {
    pub fn new(config: RemoteConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(config.timeout))
            .build()
            .into();
        let gate = InFlightGate::new(config.max_in_flight);
        Self {
            config,
            agent,
            gate,
        }
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }

    fn descriptor_for(&self, kind: BackendKind) -> BackendDescriptor {
        BackendDescriptor {
            kind,
            implementation_id: REMOTE_IMPLEMENTATION_ID.to_string(),
            version: self.config.version.clone(),
            endpoint: Some(self.config.endpoint.clone()),
        }
    }

    /// POST with retries on retriable failures. Every protocol route is
    /// idempotent.
    pub fn post<Req: Serialize, Resp: DeserializeOwned>(
        &self,
        path: &str,
        body: &Req,
    ) -> Result<Resp, BackendError> {
        let attempts = self.config.retry.max_attempts.max(1);
        let mut attempt = 1;
        loop {
            match self.post_once(path, body) {
                Ok(resp) => return Ok(resp),
                Err(err) if err.is_retriable() => {
                    log::warn!("{path} attempt {attempt}/{attempts} failed: {err}");
                    if attempt >= attempts {
                        return Err(BackendError::Exhausted {
                            attempts,
                            last: err.to_string(),
                        });
                    }
                    thread::sleep(self.config.retry.delay_after(attempt));
                    attempt += 1;
                }
                Err(err) => return Err(err),
            }
        }
    }

    fn post_once<Req: Serialize, Resp: DeserializeOwned>(
        &self,
        path: &str,
        body: &Req,
    ) -> Result<Resp, BackendError> {
        let url = format!("{}{}", self.config.endpoint.trim_end_matches('/'), path);
        let _ticket = self.gate.enter();
        let mut response = match self.agent.post(&url).send_json(body) {
            Ok(r) => r,
            Err(ureq::Error::Json(e)) => return Err(BackendError::Protocol(e.to_string())),
            Err(e) => return Err(BackendError::Retriable(format!("{url}: {e}"))),
        };
        let status = response.status().as_u16();
        let reader = response.body_mut().with_config().limit(MAX_RESPONSE_BYTES);
        if (200..300).contains(&status) {
            return reader
                .read_json::<Resp>()
                .map_err(|e| BackendError::Protocol(format!("{url}: {e}")));
        }
        let text = reader.read_to_string().unwrap_or_default();
        let (code, message) = match serde_json::from_str::<ErrorBody>(&text) {
            Ok(b) => (b.error.code, b.error.message),
            Err(_) => (format!("http_{status}"), text),
        };
        if (500..600).contains(&status) {
            Err(BackendError::Retriable(format!("{url}: {status} {code}: {message}")))
        } else {
            Err(BackendError::Permanent { code, message })
        }
    }

    fn encode(image: &RgbImage) -> Result<String, BackendError> {
        png_to_base64(image).map_err(|e| BackendError::Protocol(e.to_string()))
    }

    fn decode(text: &str) -> Result<RgbImage, BackendError> {
        png_from_base64(text).map_err(|e| BackendError::Protocol(e.to_string()))
    }

    fn inpaint_remote(
        &self,
        image: &RgbImage,
        mask: &BinaryMask,
        prompt: Option<&str>,
    ) -> Result<RgbImage, BackendError> {
        if mask.is_empty() {
            return Ok(image.clone());
        }
        let req = InpaintRequest {
            image: Self::encode(image)?,
            mask_rle: mask.to_rle(),
            prompt: prompt.map(str::to_string),
        };
        let resp: InpaintResponse = self.post(INPAINT_PATH, &req)?;
        let generated = Self::decode(&resp.image)?;
        composite_masked(image, &generated, mask)
    }
}

impl Detector for RemoteBackend {
    fn descriptor(&self) -> BackendDescriptor {
        self.descriptor_for(BackendKind::Detector)
    }

    fn detect(
        &self,
        _frame_id: &str,
        image: &RgbImage,
        prompt: Option<&str>,
    ) -> Result<Vec<DetectedObject>, BackendError> {
        let req = DetectRequest {
            image: Self::encode(image)?,
            prompt: prompt.map(str::to_string),
        };
        let resp: DetectResponse = self.post(DETECT_PATH, &req)?;
        let objects = objects_from_wire(
            &resp.objects,
            (image.height(), image.width()),
            self.config.min_score,
        );
        for o in objects.iter().filter(|o| o.clipped) {
            log::warn!("detector box for `{}` clipped to {:?}", o.label, o.bbox);
        }
        Ok(objects)
    }
}

impl Segmenter for RemoteBackend {
    fn descriptor(&self) -> BackendDescriptor {
        self.descriptor_for(BackendKind::Segmenter)
    }

    fn segment(
        &self,
        image: &RgbImage,
        boxes: &[BBox],
    ) -> Result<Vec<(BinaryMask, f64)>, BackendError> {
        if boxes.is_empty() {
            return Ok(Vec::new());
        }
        let req = SegmentRequest {
            image: Self::encode(image)?,
            boxes: boxes.iter().copied().map(WireBox::from).collect(),
        };
        let resp: SegmentResponse = self.post(SEGMENT_PATH, &req)?;
        if resp.masks.len() != boxes.len() {
            return Err(BackendError::Protocol(format!(
                "segmenter returned {} masks for {} boxes",
                resp.masks.len(),
                boxes.len()
            )));
        }
        resp.masks
            .into_iter()
            .map(|m| {
                let mask = BinaryMask::from_rle(image.height(), image.width(), &m.rle)
                    .map_err(|e| BackendError::Protocol(e.to_string()))?;
                Ok((mask, m.score.clamp(0.0, 1.0)))
            })
            .collect()
    }
}

impl MaskInpainter for RemoteBackend {
    fn descriptor(&self) -> BackendDescriptor {
        self.descriptor_for(BackendKind::MaskInpainter)
    }

    fn inpaint(&self, image: &RgbImage, mask: &BinaryMask) -> Result<RgbImage, BackendError> {
        self.inpaint_remote(image, mask, None)
    }
}

impl PromptedInpainter for RemoteBackend {
    fn descriptor(&self) -> BackendDescriptor {
        self.descriptor_for(BackendKind::PromptedInpainter)
    }

    fn inpaint(
        &self,
        image: &RgbImage,
        mask: &BinaryMask,
        prompt: &str,
    ) -> Result<RgbImage, BackendError> {
        self.inpaint_remote(image, mask, Some(prompt))
    }
}

impl ObjectSuggester for RemoteBackend {
    fn descriptor(&self) -> BackendDescriptor {
        self.descriptor_for(BackendKind::Suggester)
    }

    fn suggest(&self, object_label: &str, context: &str) -> Result<Suggestion, BackendError> {
        let req = SuggestRequest {
            label: object_label.to_string(),
            context: context.to_string(),
        };
        let resp: SuggestResponse = self.post(SUGGEST_PATH, &req)?;
        Ok(Suggestion {
            name: resp.name,
            description: resp.description,
            size_class: resp.size_class,
        })
    }
}

impl FeatureExtractor for RemoteBackend {
    fn descriptor(&self) -> BackendDescriptor {
        self.descriptor_for(BackendKind::FeatureExtractor)
    }

    fn embed(&self, images: &[RgbImage]) -> Result<Vec<Vec<f64>>, BackendError> {
        if images.is_empty() {
            return Ok(Vec::new());
        }
        let req = EmbedRequest {
            images: images.iter().map(Self::encode).collect::<Result<_, _>>()?,
        };
        let resp: EmbedResponse = self.post(EMBED_PATH, &req)?;
        if resp.features.len() != images.len() {
            return Err(BackendError::Protocol(format!(
                "embed returned {} rows for {} images",
                resp.features.len(),
                images.len()
            )));
        }
        let dim = resp.features[0].len();
        if resp.features.iter().any(|row| row.len() != dim) {
            return Err(BackendError::Protocol("ragged feature matrix".into()));
        }
        Ok(resp.features)
    }
}
