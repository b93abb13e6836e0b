//! The pluggable decision contract: three query roles answered either by
//! deterministic offline oracles or by a remote multimodal model over
//! HTTP, with text parsers and a mock server fixture for tests.

pub mod mock;

use std::collections::BTreeMap;
use std::sync::{Mutex, OnceLock};

use base64::Engine;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::avpg::{MarkerMeta, PromptMap};
use crate::geometry::Point;
use crate::ptd::MarkerScores;
use crate::worldsim::Scene;

/// Environment variable naming the remote reasoner endpoint.
pub const ENDPOINT_ENV_VAR: &str = "TOPV_REASONER_URL";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryRole {
    /// May a sub-region be worth inspecting at a larger scale?
    SelectRegion,
    /// Where is the target most likely located?
    PredictTarget,
    /// How likely is the target near each key-area marker?
    ScoreMarkers,
}

impl QueryRole {
    pub fn as_str(&self) -> &'static str {
        match self {
            QueryRole::SelectRegion => "select_region",
            QueryRole::PredictTarget => "predict_target",
            QueryRole::ScoreMarkers => "score_markers",
        }
    }
}

/// One question to the reasoning backend. The prompt map carries both the
/// raster (for remote models) and the sidecar metadata (for oracles).
#[derive(Debug, Clone, Copy)]
pub struct ReasonerQuery<'a> {
    pub role: QueryRole,
    pub prompt_map: &'a PromptMap,
    pub target_category: &'a str,
}

/// Role-matched answer. `Region(None)` means the reasoner declined to pick
/// a sub-region.
#[derive(Debug, Clone, PartialEq)]
pub enum ReasonerAnswer {
    Region(Option<Point>),
    Target(Point),
    Scores(MarkerScores),
}

/// A total decision backend: every well-formed query gets an answer,
/// falling back to a default rather than failing.
pub trait Reasoner: Send + Sync {
    fn name(&self) -> &'static str;
    fn query(&self, q: &ReasonerQuery) -> ReasonerAnswer;
}

/// Pairwise category affinity in [0, 1], looked up symmetrically from a
/// built-in co-occurrence table; identical categories score 1 and pairs
/// the table does not know score 0.5.
pub fn co_occurrence(a: &str, b: &str) -> f64 {
    if a == b {
        return 1.0;
    }
    const TABLE: &[(&str, &str, f64)] = &[
        ("bed", "lamp", 0.8),
        ("bed", "cabinet", 0.5),
        ("bed", "chair", 0.3),
        ("bed", "table", 0.2),
        ("bed", "sofa", 0.15),
        ("bed", "tv_monitor", 0.2),
        ("bed", "plant", 0.2),
        ("bed", "toilet", 0.05),
        ("bed", "sink", 0.1),
        ("bed", "refrigerator", 0.05),
        ("sofa", "tv_monitor", 0.9),
        ("sofa", "table", 0.7),
        ("sofa", "plant", 0.6),
        ("sofa", "lamp", 0.5),
        ("sofa", "chair", 0.4),
        ("sofa", "cabinet", 0.3),
        ("sofa", "toilet", 0.05),
        ("sofa", "sink", 0.1),
        ("sofa", "refrigerator", 0.2),
        ("chair", "table", 0.85),
        ("chair", "lamp", 0.4),
        ("chair", "plant", 0.4),
        ("chair", "tv_monitor", 0.35),
        ("chair", "cabinet", 0.3),
        ("chair", "sink", 0.2),
        ("chair", "refrigerator", 0.3),
        ("chair", "toilet", 0.1),
        ("toilet", "sink", 0.9),
        ("toilet", "cabinet", 0.4),
        ("toilet", "lamp", 0.1),
        ("toilet", "table", 0.05),
        ("toilet", "plant", 0.1),
        ("toilet", "tv_monitor", 0.05),
        ("toilet", "refrigerator", 0.05),
        ("tv_monitor", "table", 0.5),
        ("tv_monitor", "cabinet", 0.5),
        ("tv_monitor", "plant", 0.4),
        ("tv_monitor", "lamp", 0.3),
        ("tv_monitor", "sink", 0.05),
        ("tv_monitor", "refrigerator", 0.15),
        ("plant", "table", 0.5),
        ("plant", "lamp", 0.35),
        ("plant", "cabinet", 0.3),
        ("plant", "sink", 0.15),
        ("plant", "refrigerator", 0.2),
        ("refrigerator", "sink", 0.7),
        ("refrigerator", "cabinet", 0.7),
        ("refrigerator", "table", 0.5),
        ("sink", "cabinet", 0.6),
        ("table", "lamp", 0.45),
        ("table", "cabinet", 0.4),
    ];
    for &(x, y, v) in TABLE {
        if (x == a && y == b) || (x == b && y == a) {
            return v;
        }
    }
    0.5
}

/// Offline commonsense oracle. Declines map scaling unless text boxes
/// overlap, predicts the target at the largest frontier's midpoint, and
/// scores markers by category co-occurrence with the target.
#[derive(Debug, Default, Clone, Copy)]
pub struct HeuristicReasoner;

impl HeuristicReasoner {
    fn select_region(&self, pm: &PromptMap) -> Option<Point> {
        let mut best: Option<(f64, Point)> = None;
        for i in 0..pm.textboxes.len() {
            for j in (i + 1)..pm.textboxes.len() {
                let iou = crate::avpg::rect_iou(&pm.textboxes[i].rect, &pm.textboxes[j].rect);
                if iou > 0.0 && best.is_none_or(|(b, _)| iou > b) {
                    let a = pm.textboxes[i].anchor_world;
                    let b = pm.textboxes[j].anchor_world;
                    best = Some((iou, Point::new((a.x + b.x) / 2.0, (a.y + b.y) / 2.0)));
                }
            }
        }
        best.map(|(_, center)| center)
    }

    fn predict_target(&self, q: &ReasonerQuery) -> Point {
        let pm = q.prompt_map;
        if let Some(f) = pm.frontiers.iter().max_by(|a, b| {
            a.cells
                .cmp(&b.cells)
                .then(b.midpoint.x.total_cmp(&a.midpoint.x))
                .then(b.midpoint.y.total_cmp(&a.midpoint.y))
        }) {
            return f.midpoint;
        }
        // Nothing left to explore: the best-affine marker, then the agent.
        let scores = self.score_markers(q);
        pm.markers
            .iter()
            .zip(&scores.scores)
            .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.id.cmp(&a.0.id)))
            .map(|(m, _)| m.centroid)
            .unwrap_or(pm.pose.position)
    }

    fn score_markers(&self, q: &ReasonerQuery) -> MarkerScores {
        let scores = q
            .prompt_map
            .meta
            .markers
            .iter()
            .map(|m| {
                m.categories
                    .iter()
                    .map(|c| co_occurrence(q.target_category, c))
                    .fold(f64::NAN, f64::max)
            })
            .map(|s| if s.is_nan() { 0.5 } else { s })
            .collect();
        MarkerScores::clamped(scores)
    }
}

impl Reasoner for HeuristicReasoner {
    fn name(&self) -> &'static str {
        "heuristic"
    }

    fn query(&self, q: &ReasonerQuery) -> ReasonerAnswer {
        match q.role {
            QueryRole::SelectRegion => ReasonerAnswer::Region(self.select_region(q.prompt_map)),
            QueryRole::PredictTarget => ReasonerAnswer::Target(self.predict_target(q)),
            QueryRole::ScoreMarkers => ReasonerAnswer::Scores(self.score_markers(q)),
        }
    }
}

/// Omniscient oracle for upper-bound runs: reads the true target position
/// out of the scene. Declines map scaling and scores markers by their
/// distance to the true target.
pub struct ScriptedReasoner {
    scene: Scene,
}

impl ScriptedReasoner {
    pub fn new(scene: Scene) -> Self {
        Self { scene }
    }

    fn true_target(&self, q: &ReasonerQuery) -> Option<Point> {
        self.scene
            .instances_of(q.target_category)
            .into_iter()
            .map(|i| self.scene.objects[i].position)
            .min_by(|a, b| {
                let pa = a.distance(q.prompt_map.pose.position);
                let pb = b.distance(q.prompt_map.pose.position);
                pa.total_cmp(&pb)
                    .then(a.x.total_cmp(&b.x))
                    .then(a.y.total_cmp(&b.y))
            })
    }
}

impl Reasoner for ScriptedReasoner {
    fn name(&self) -> &'static str {
        "scripted"
    }

    fn query(&self, q: &ReasonerQuery) -> ReasonerAnswer {
        match q.role {
            QueryRole::SelectRegion => ReasonerAnswer::Region(None),
            QueryRole::PredictTarget => match self.true_target(q) {
                Some(p) => ReasonerAnswer::Target(p),
                None => HeuristicReasoner.query(q),
            },
            QueryRole::ScoreMarkers => {
                let target = self.true_target(q);
                let scores = q
                    .prompt_map
                    .markers
                    .iter()
                    .map(|m| match target {
                        Some(t) => (1.0 - m.centroid.distance(t) / 10.0).clamp(0.0, 1.0),
                        None => 0.5,
                    })
                    .collect();
                ReasonerAnswer::Scores(MarkerScores::clamped(scores))
            }
        }
    }
}

/// Adversarial baseline: uniformly random valid answers, seeded for
/// reproducibility. Intended to be constructed fresh per episode.
pub struct UniformRandomReasoner {
    rng: Mutex<ChaCha8Rng>,
}

impl UniformRandomReasoner {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: Mutex::new(ChaCha8Rng::seed_from_u64(seed)),
        }
    }
}

impl Reasoner for UniformRandomReasoner {
    fn name(&self) -> &'static str {
        "random"
    }

    fn query(&self, q: &ReasonerQuery) -> ReasonerAnswer {
        let mut rng = self.rng.lock().expect("reasoner rng poisoned");
        let w = q.prompt_map.crop_window;
        let random_point = |rng: &mut ChaCha8Rng| {
            Point::new(
                rng.random_range(w.x..=w.x + w.w),
                rng.random_range(w.y..=w.y + w.h),
            )
        };
        match q.role {
            QueryRole::SelectRegion => {
                if rng.random_bool(0.5) {
                    ReasonerAnswer::Region(None)
                } else {
                    let p = random_point(&mut rng);
                    ReasonerAnswer::Region(Some(p))
                }
            }
            QueryRole::PredictTarget => {
                let p = random_point(&mut rng);
                ReasonerAnswer::Target(p)
            }
            QueryRole::ScoreMarkers => ReasonerAnswer::Scores(MarkerScores {
                scores: (0..q.prompt_map.markers.len())
                    .map(|_| rng.random_range(0.0..=1.0))
                    .collect(),
            }),
        }
    }
}

/// Request document POSTed to the remote endpoint.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WireRequest {
    pub role: QueryRole,
    pub text_prompt: String,
    /// Base64-encoded PNG of the prompt map.
    pub image: String,
    pub metadata: WireMetadata,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WireMetadata {
    pub target_category: String,
    pub coordinate_frame: String,
    /// Rendered world window: min x, min y, width, height (meters).
    pub crop_window: [f64; 4],
    pub pixels_per_meter: f64,
    pub markers: Vec<MarkerMeta>,
}

/// Response document: free-form model text, parsed by role.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WireResponse {
    pub text: String,
}

const TEMPLATE_SELECT_REGION: &str = include_str!("../../assets/prompt_select_region.txt");
const TEMPLATE_PREDICT_TARGET: &str = include_str!("../../assets/prompt_predict_target.txt");
const TEMPLATE_SCORE_MARKERS: &str = include_str!("../../assets/prompt_score_markers.txt");

/// Fill the role's prompt template with the target category and a textual
/// marker table.
pub fn render_prompt(role: QueryRole, target: &str, markers: &[MarkerMeta]) -> String {
    let template = match role {
        QueryRole::SelectRegion => TEMPLATE_SELECT_REGION,
        QueryRole::PredictTarget => TEMPLATE_PREDICT_TARGET,
        QueryRole::ScoreMarkers => TEMPLATE_SCORE_MARKERS,
    };
    let table = if markers.is_empty() {
        "(none)".to_string()
    } else {
        markers
            .iter()
            .map(|m| {
                let cats = if m.categories.is_empty() {
                    String::new()
                } else {
                    format!(" near: {}", m.categories.join(", "))
                };
                format!("m{}: ({:.1}, {:.1}){}", m.id, m.centroid[0], m.centroid[1], cats)
            })
            .collect::<Vec<_>>()
            .join("\n")
    };
    template.replace("{target}", target).replace("{marker_table}", &table)
}

/// Remote-client tunables.
#[derive(Debug, Clone)]
pub struct RemoteConfig {
    pub endpoint: String,
    /// Additional attempts after the first failure.
    pub retries: u32,
    /// Per-request deadline, seconds.
    pub timeout_secs: u64,
}

impl RemoteConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            retries: 2,
            timeout_secs: 30,
        }
    }
}

/// HTTP client for a hosted multimodal model. Transport or parse failures
/// degrade to the heuristic oracle's answer so episodes always proceed.
pub struct RemoteReasoner {
    cfg: RemoteConfig,
    client: reqwest::blocking::Client,
    fallback: HeuristicReasoner,
}

impl RemoteReasoner {
    pub fn new(cfg: RemoteConfig) -> Self {
        let client = reqwest::blocking::Client::builder()
            .timeout(std::time::Duration::from_secs(cfg.timeout_secs))
            .build()
            .expect("reqwest client construction cannot fail with static options");
        Self {
            cfg,
            client,
            fallback: HeuristicReasoner,
        }
    }

    /// Build a client from the `TOPV_REASONER_URL` environment variable.
    pub fn from_env() -> Option<Self> {
        std::env::var(ENDPOINT_ENV_VAR)
            .ok()
            .filter(|v| !v.is_empty())
            .map(|url| Self::new(RemoteConfig::new(url)))
    }

    pub fn build_request(&self, q: &ReasonerQuery) -> WireRequest {
        let meta = &q.prompt_map.meta;
        WireRequest {
            role: q.role,
            text_prompt: render_prompt(q.role, q.target_category, &meta.markers),
            image: base64::engine::general_purpose::STANDARD.encode(q.prompt_map.png_bytes()),
            metadata: WireMetadata {
                target_category: q.target_category.to_string(),
                coordinate_frame: meta.coordinate_frame.clone(),
                crop_window: meta.crop_window,
                pixels_per_meter: meta.pixels_per_meter,
                markers: meta.markers.clone(),
            },
        }
    }

    fn post(&self, req: &WireRequest) -> Option<String> {
        for _ in 0..=self.cfg.retries {
            let sent = self
                .client
                .post(&self.cfg.endpoint)
                .json(req)
                .send()
                .and_then(|r| r.error_for_status())
                .and_then(|r| r.json::<WireResponse>());
            if let Ok(resp) = sent {
                return Some(resp.text);
            }
        }
        None
    }
}

impl Reasoner for RemoteReasoner {
    fn name(&self) -> &'static str {
        "remote"
    }

    fn query(&self, q: &ReasonerQuery) -> ReasonerAnswer {
        let request = self.build_request(q);
        let Some(text) = self.post(&request) else {
            return self.fallback.query(q);
        };
        match q.role {
            // No coordinates in the reply reads as a decline.
            QueryRole::SelectRegion => ReasonerAnswer::Region(parse_coordinates(&text)),
            QueryRole::PredictTarget => match parse_coordinates(&text) {
                Some(p) => ReasonerAnswer::Target(p),
                None => self.fallback.query(q),
            },
            QueryRole::ScoreMarkers => {
                let ids: Vec<usize> = q.prompt_map.markers.iter().map(|m| m.id).collect();
                match parse_scores(&text, &ids) {
                    Some(s) => ReasonerAnswer::Scores(s),
                    None => self.fallback.query(q),
                }
            }
        }
    }
}

/// First "(x, y)" decimal pair in free-form text, in the prompt map's
/// labeled meter frame.
pub fn parse_coordinates(text: &str) -> Option<Point> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| {
        Regex::new(r"\(\s*(-?\d+(?:\.\d+)?)\s*,\s*(-?\d+(?:\.\d+)?)\s*\)")
            .expect("static regex is valid")
    });
    for caps in re.captures_iter(text) {
        let (Ok(x), Ok(y)) = (caps[1].parse::<f64>(), caps[2].parse::<f64>()) else {
            continue;
        };
        let p = Point::new(x, y);
        if p.is_finite() {
            return Some(p);
        }
    }
    None
}

/// Extract "m<id>: <value>" pairs. Markers the text does not mention
/// default to 0.5; values clamp into [0, 1]; text with no pairs at all
/// yields `None`.
pub fn parse_scores(text: &str, marker_ids: &[usize]) -> Option<MarkerScores> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| {
        Regex::new(r"(?i)m(\d+)\s*[:=]\s*(-?\d+(?:\.\d+)?)").expect("static regex is valid")
    });
    let mut found: BTreeMap<usize, f64> = BTreeMap::new();
    for caps in re.captures_iter(text) {
        let (Ok(id), Ok(v)) = (caps[1].parse::<usize>(), caps[2].parse::<f64>()) else {
            continue;
        };
        found.entry(id).or_insert(v);
    }
    if found.is_empty() {
        return None;
    }
    Some(MarkerScores {
        scores: marker_ids
            .iter()
            .map(|id| found.get(id).copied().unwrap_or(0.5).clamp(0.0, 1.0))
            .collect(),
    })
}
