//! The state machines a session can run, behind one interface.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde_json::{json, Map, Value};

use dichopt_core::diagnostics::{
    alignment_step, box_outline, classify_screening, make_fusion_stimulus, make_noise_stimulus, render_alignment,
    screening_schedule, squint_offset_to_angle, AlignmentCommand, AlignmentState, ScreeningOutcome,
    ScreeningTrial, SplitAxis, SquintMeasurement, DEFAULT_CIRCLE_RADIUS, DEFAULT_DENSITY_HIGH, DEFAULT_DENSITY_LOW,
};
use dichopt_core::game::{fixed_to_speed, new_game, render_frame, step, GameConfig, GameEvent, GameInput, GameOutcome, GameState};
use dichopt_core::persistence::{Activity, PatientProfile};
use dichopt_core::stereo::{attenuate, paint_sprite};
use dichopt_core::viewer::{InterestMask, ViewingPlan};
use dichopt_core::{ComposePolicy, Image, Rgba, StereoPair};

use crate::eventlog::LogBody;

/// Size of diagnostic stimuli, matching the default game field.
pub const STIMULUS_SIZE: (u32, u32) = (320, 240);
pub const DEFAULT_PIXEL_PITCH_MM: f64 = 0.25;
pub const DEFAULT_VIEWING_DISTANCE_MM: f64 = 600.0;
pub const DEFAULT_SCREENING_TRIALS: u64 = 10;

/// Rejected parameter, reported to the client as a BadParam error.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamError(pub String);

impl<T: std::fmt::Display> From<T> for ParamError {
    fn from(e: T) -> Self {
        ParamError(e.to_string())
    }
}

/// Typed access to a JSON argument map that rejects leftovers.
pub(crate) struct Args {
    map: Map<String, Value>,
    ctx: &'static str,
}

impl Args {
    pub(crate) fn new(map: Map<String, Value>, ctx: &'static str) -> Self {
        Args { map, ctx }
    }

    fn take(&mut self, key: &str) -> Option<Value> {
        self.map.remove(key).filter(|v| !v.is_null())
    }

    pub(crate) fn f64(&mut self, key: &str) -> Result<Option<f64>, ParamError> {
        self.take(key)
            .map(|v| v.as_f64().filter(|x| x.is_finite()).ok_or_else(|| self.bad(key, "a number")))
            .transpose()
    }

    pub(crate) fn unit(&mut self, key: &str) -> Result<Option<f64>, ParamError> {
        match self.f64(key)? {
            Some(v) if !(0.0..=1.0).contains(&v) => Err(ParamError(format!("{key} must be within [0, 1], got {v}"))),
            v => Ok(v),
        }
    }

    pub(crate) fn i32(&mut self, key: &str) -> Result<Option<i32>, ParamError> {
        self.take(key)
            .map(|v| {
                v.as_i64()
                    .and_then(|x| i32::try_from(x).ok())
                    .ok_or_else(|| self.bad(key, "an integer"))
            })
            .transpose()
    }

    pub(crate) fn u64(&mut self, key: &str) -> Result<Option<u64>, ParamError> {
        self.take(key)
            .map(|v| v.as_u64().ok_or_else(|| self.bad(key, "a non-negative integer")))
            .transpose()
    }

    pub(crate) fn bool(&mut self, key: &str) -> Result<Option<bool>, ParamError> {
        self.take(key)
            .map(|v| v.as_bool().ok_or_else(|| self.bad(key, "a boolean")))
            .transpose()
    }

    pub(crate) fn string(&mut self, key: &str) -> Result<Option<String>, ParamError> {
        self.take(key)
            .map(|v| v.as_str().map(str::to_string).ok_or_else(|| self.bad(key, "a string")))
            .transpose()
    }

    pub(crate) fn object(&mut self, key: &str) -> Result<Option<Map<String, Value>>, ParamError> {
        self.take(key)
            .map(|v| match v {
                Value::Object(m) => Ok(m),
                _ => Err(self.bad(key, "an object")),
            })
            .transpose()
    }

    fn bad(&self, key: &str, what: &str) -> ParamError {
        ParamError(format!("{}: `{key}` must be {what}", self.ctx))
    }

    pub(crate) fn finish(self) -> Result<(), ParamError> {
        match self.map.keys().next() {
            Some(k) => Err(ParamError(format!("{}: unexpected argument `{k}`", self.ctx))),
            None => Ok(()),
        }
    }
}

fn parse_axis(s: &str) -> Result<SplitAxis, ParamError> {
    match s {
        "vertical" => Ok(SplitAxis::Vertical),
        "horizontal" => Ok(SplitAxis::Horizontal),
        other => Err(ParamError(format!("unknown axis `{other}` (vertical|horizontal)"))),
    }
}

fn axis_name(a: SplitAxis) -> &'static str {
    match a {
        SplitAxis::Vertical => "vertical",
        SplitAxis::Horizontal => "horizontal",
    }
}

/// Merges `patch` into `base` recursively; objects merge, everything else replaces.
fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                merge(b.entry(k).or_insert(Value::Null), v);
            }
        }
        (b, p) => *b = p,
    }
}

/// Game configuration for a patient: the clinic base, then the patient's
/// therapy overrides, then any `game` object from the start parameters.
pub fn game_config_for(
    base: &GameConfig,
    patient: &PatientProfile,
    patch: Option<Map<String, Value>>,
) -> Result<GameConfig, ParamError> {
    let mut cfg = base.clone();
    let o = patient.therapy.game;
    if let Some(v) = o.base_speed {
        cfg.base_invader_speed = v;
    }
    if let Some(v) = o.speed_min {
        cfg.difficulty.speed_min = v;
    }
    if let Some(v) = o.speed_max {
        cfg.difficulty.speed_max = v;
    }
    if let Some(a) = o.invaders {
        cfg.assignments.invaders = a;
    }
    if let Some(patch) = patch {
        let mut v = serde_json::to_value(&cfg)?;
        merge(&mut v, Value::Object(patch));
        cfg = serde_json::from_value(v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// What a step or command produced besides the state change.
#[derive(Debug, Default)]
pub(crate) struct Outcome {
    pub log: Vec<LogBody>,
    /// Set when the activity has reached its natural end.
    pub finished: Option<String>,
    pub reply: Value,
}

pub(crate) struct InvadersRun {
    pub state: GameState,
    policy: ComposePolicy,
    trajectory: Vec<f64>,
}

pub(crate) struct ViewerRun {
    dir: PathBuf,
    mask_name: Option<String>,
    plan: ViewingPlan,
    index: usize,
}

pub(crate) struct FusionRun {
    axis: SplitAxis,
    recognized: Option<bool>,
    attenuation: f64,
    lazy: dichopt_core::EyeSide,
}

pub(crate) struct AlignmentRun {
    pub state: AlignmentState,
    pitch_mm: f64,
    distance_mm: f64,
    attenuation: f64,
    lazy: dichopt_core::EyeSide,
}

pub(crate) struct ScreeningRun {
    schedule: Vec<(dichopt_core::EyeSide, u64)>,
    trials: Vec<ScreeningTrial>,
    density_high: f64,
    density_low: f64,
    attenuation: f64,
    lazy: dichopt_core::EyeSide,
    base: Image,
    current: Option<StereoPair>,
}

pub(crate) enum Run {
    Invaders(Box<InvadersRun>),
    Viewer(Box<ViewerRun>),
    Fusion(FusionRun),
    Alignment(AlignmentRun),
    Screening(Box<ScreeningRun>),
}

fn patient_policy(patient: &PatientProfile) -> ComposePolicy {
    ComposePolicy {
        lazy_eye: patient.amblyopic_eye,
        fellow_attenuation: patient.therapy.fellow_attenuation,
        min_shared_ratio: patient.therapy.min_shared_ratio,
        ..ComposePolicy::default()
    }
}

fn attenuated(pair: StereoPair, lazy: dichopt_core::EyeSide, factor: f64) -> Result<StereoPair, ParamError> {
    let fellow_side = lazy.other();
    let fellow = attenuate(pair.eye(fellow_side), factor)?;
    let lazy_img = pair.eye(lazy).clone();
    Ok(StereoPair::from_eyes(lazy_img, fellow, lazy)?)
}

fn screening_base() -> Image {
    let (w, h) = STIMULUS_SIZE;
    let mut base = Image::filled(w, h, Rgba::rgb(128, 128, 128)).expect("stimulus size");
    let target = box_outline(120, 90, 10, Rgba::WHITE, Rgba::TRANSPARENT).expect("box size");
    paint_sprite(&mut base, &target, ((w as i32 - 120) / 2, (h as i32 - 90) / 2));
    base
}

fn fusion_shape() -> Image {
    let (w, h) = STIMULUS_SIZE;
    let mut shape = Image::filled(w, h, Rgba::BLACK).expect("stimulus size");
    let target = box_outline(160, 120, 4, Rgba::WHITE, Rgba::TRANSPARENT).expect("box size");
    paint_sprite(&mut shape, &target, ((w as i32 - 160) / 2, (h as i32 - 120) / 2));
    shape
}

impl Run {
    pub(crate) fn start(
        activity: Activity,
        patient: &PatientProfile,
        params: Map<String, Value>,
        base_game: &GameConfig,
    ) -> Result<Run, ParamError> {
        let mut args = Args::new(params, "start");
        let run = match activity {
            Activity::Invaders => {
                let cfg = game_config_for(base_game, patient, args.object("game")?)?;
                let state = new_game(&cfg)?;
                let policy = patient_policy(patient);
                render_frame(&state, &policy)?;
                Run::Invaders(Box::new(InvadersRun {
                    trajectory: vec![state.speed()],
                    state,
                    policy,
                }))
            }
            Activity::Viewer => {
                let dir = PathBuf::from(args.string("plan")?.ok_or(ParamError("viewer needs a `plan` directory".into()))?);
                let mask_name = args.string("mask")?;
                let mut plan = ViewingPlan::load_dir(&dir, mask_name.as_deref())?;
                // The clip supplies the split; the prescription supplies the eye and dose.
                plan.policy.lazy_eye = patient.amblyopic_eye;
                plan.policy.fellow_attenuation = patient.therapy.fellow_attenuation;
                plan.render_frame(0)?;
                Run::Viewer(Box::new(ViewerRun {
                    dir,
                    mask_name,
                    plan,
                    index: 0,
                }))
            }
            Activity::FusionTest => Run::Fusion(FusionRun {
                axis: parse_axis(args.string("axis")?.as_deref().unwrap_or("vertical"))?,
                recognized: None,
                attenuation: patient.therapy.fellow_attenuation,
                lazy: patient.amblyopic_eye,
            }),
            Activity::Alignment => {
                let pitch_mm = args.f64("pitchMm")?.unwrap_or(DEFAULT_PIXEL_PITCH_MM);
                let distance_mm = args.f64("distanceMm")?.unwrap_or(DEFAULT_VIEWING_DISTANCE_MM);
                squint_offset_to_angle((0, 0), pitch_mm, distance_mm)?;
                let radius = args.u64("radius")?.unwrap_or(DEFAULT_CIRCLE_RADIUS as u64);
                if radius == 0 || radius > 1000 {
                    return Err(ParamError(format!("radius {radius} outside 1..=1000")));
                }
                let (w, h) = STIMULUS_SIZE;
                Run::Alignment(AlignmentRun {
                    state: AlignmentState::centered((w as i32 / 2, h as i32 / 2), radius as u32),
                    pitch_mm,
                    distance_mm,
                    attenuation: patient.therapy.fellow_attenuation,
                    lazy: patient.amblyopic_eye,
                })
            }
            Activity::Screening => {
                let n = args.u64("trials")?.unwrap_or(DEFAULT_SCREENING_TRIALS);
                if n == 0 || n > 1000 {
                    return Err(ParamError(format!("trials {n} outside 1..=1000")));
                }
                let seed = args.u64("seed")?.unwrap_or(0);
                let density_high = args.unit("dHigh")?.unwrap_or(DEFAULT_DENSITY_HIGH);
                let density_low = args.unit("dLow")?.unwrap_or(DEFAULT_DENSITY_LOW);
                let mut run = ScreeningRun {
                    schedule: screening_schedule(n as usize, seed),
                    trials: Vec::new(),
                    density_high,
                    density_low,
                    attenuation: patient.therapy.fellow_attenuation,
                    lazy: patient.amblyopic_eye,
                    base: screening_base(),
                    current: None,
                };
                run.prepare(patient.amblyopic_eye)?;
                Run::Screening(Box::new(run))
            }
        };
        args.finish()?;
        Ok(run)
    }

    pub(crate) fn game_config(&self) -> Option<GameConfig> {
        match self {
            Run::Invaders(r) => Some(r.state.config.clone()),
            _ => None,
        }
    }

    pub(crate) fn game_state(&self) -> Option<&GameState> {
        match self {
            Run::Invaders(r) => Some(&r.state),
            _ => None,
        }
    }

    /// Advances one tick.
    pub(crate) fn step(&mut self, input: GameInput) -> Outcome {
        let mut out = Outcome::default();
        match self {
            Run::Invaders(r) => {
                let (next, events) = step(&r.state, input).expect("finished games are never stepped");
                r.state = next;
                for e in events {
                    if let GameEvent::DifficultyWindow { to_fixed, .. } = e {
                        r.trajectory.push(fixed_to_speed(to_fixed));
                    }
                    out.log.push(LogBody::Game { event: e });
                }
                if let Some(o) = r.state.outcome {
                    out.finished = Some(outcome_name(o).to_string());
                }
            }
            Run::Viewer(r) => r.index = (r.index + 1) % r.plan.source.len(),
            Run::Fusion(_) | Run::Alignment(_) | Run::Screening(_) => {}
        }
        out
    }

    pub(crate) fn render(&self) -> Result<StereoPair, ParamError> {
        match self {
            Run::Invaders(r) => Ok(render_frame(&r.state, &r.policy)?),
            Run::Viewer(r) => Ok(r.plan.render_frame(r.index)?),
            Run::Fusion(r) => {
                let policy = ComposePolicy::with_lazy_eye(r.lazy);
                let stim = make_fusion_stimulus(&fusion_shape(), r.axis, &policy)?;
                attenuated(stim.pair, r.lazy, r.attenuation)
            }
            Run::Alignment(r) => {
                let policy = ComposePolicy::with_lazy_eye(r.lazy);
                let pair = render_alignment(&r.state, STIMULUS_SIZE, &policy, Rgba::WHITE)?;
                attenuated(pair, r.lazy, r.attenuation)
            }
            Run::Screening(r) => {
                let pair = r.current.clone().ok_or(ParamError("no trial in progress".into()))?;
                attenuated(pair, r.lazy_eye(), r.attenuation)
            }
        }
    }

    pub(crate) fn command(&mut self, name: &str, args: Map<String, Value>) -> Result<Outcome, ParamError> {
        let mut args = Args::new(args, "cmd");
        let mut out = Outcome::default();
        match (self, name) {
            (Run::Invaders(r), "set") => {
                let att = args.unit("attenuation")?;
                let speed = args.f64("speed")?;
                let adaptive = args.bool("adaptive")?;
                args.finish()?;
                let d = r.state.config.difficulty;
                if let Some(s) = speed {
                    if !(d.speed_min..=d.speed_max).contains(&s) {
                        return Err(ParamError(format!("speed {s} outside [{}, {}]", d.speed_min, d.speed_max)));
                    }
                }
                if let Some(a) = att {
                    let policy = ComposePolicy { fellow_attenuation: a, ..r.policy };
                    render_frame(&r.state, &policy)?;
                    r.policy = policy;
                }
                if let Some(s) = speed {
                    r.state.difficulty.set_speed(s);
                    r.trajectory.push(r.state.speed());
                }
                if let Some(a) = adaptive {
                    r.state.difficulty.set_adaptive(a);
                }
                out.reply = json!({"speed": r.state.speed(), "attenuation": r.policy.fellow_attenuation});
            }
            (Run::Viewer(r), "set") => {
                let att = args.unit("attenuation")?;
                let mask = args.string("mask")?;
                args.finish()?;
                let mut plan = r.plan.clone();
                if let Some(a) = att {
                    plan.policy.fellow_attenuation = a;
                }
                if let Some(m) = &mask {
                    if m.contains(['/', '\\']) || m.starts_with('.') {
                        return Err(ParamError(format!("mask `{m}` must be a file name in the clip directory")));
                    }
                    plan.mask = InterestMask::load_png(&r.dir.join(m))?;
                }
                plan.render_frame(r.index)?;
                r.plan = plan;
                if mask.is_some() {
                    r.mask_name = mask;
                }
                out.reply = json!({"attenuation": r.plan.policy.fellow_attenuation, "mask": r.mask_label()});
            }
            (Run::Fusion(r), "set") => {
                let att = args.unit("attenuation")?;
                let axis = args.string("axis")?.map(|a| parse_axis(&a)).transpose()?;
                args.finish()?;
                r.attenuation = att.unwrap_or(r.attenuation);
                r.axis = axis.unwrap_or(r.axis);
                out.reply = json!({"attenuation": r.attenuation, "axis": axis_name(r.axis)});
            }
            (Run::Fusion(r), "recognized") => {
                let value = args.bool("value")?.ok_or(ParamError("recognized needs a boolean `value`".into()))?;
                args.finish()?;
                r.recognized = Some(value);
                out.reply = json!({"recognized": value});
            }
            (Run::Alignment(r), "translate") => {
                let dx = args.i32("dx")?.unwrap_or(0);
                let dy = args.i32("dy")?.unwrap_or(0);
                args.finish()?;
                if dx.abs() > 1000 || dy.abs() > 1000 {
                    return Err(ParamError("translation steps are limited to 1000 px".into()));
                }
                r.state = alignment_step(&r.state, AlignmentCommand::Translate { dx, dy })?;
                out.reply = json!({"offsetPx": r.state.offset()});
            }
            (Run::Alignment(r), "confirm") => {
                args.finish()?;
                r.state = alignment_step(&r.state, AlignmentCommand::Confirm)?;
                let m = r.measurement();
                out.reply = serde_json::to_value(m)?;
            }
            (Run::Alignment(r), "set") => {
                let att = args.unit("attenuation")?;
                args.finish()?;
                r.attenuation = att.unwrap_or(r.attenuation);
                out.reply = json!({"attenuation": r.attenuation});
            }
            (Run::Screening(r), "set") => {
                let att = args.unit("attenuation")?;
                let dh = args.unit("dHigh")?.unwrap_or(r.density_high);
                let dl = args.unit("dLow")?.unwrap_or(r.density_low);
                args.finish()?;
                if dl > dh {
                    return Err(ParamError(format!("dLow {dl} exceeds dHigh {dh}")));
                }
                r.attenuation = att.unwrap_or(r.attenuation);
                if (dh, dl) != (r.density_high, r.density_low) {
                    r.density_high = dh;
                    r.density_low = dl;
                    let lazy = r.lazy_eye();
                    r.prepare(lazy)?;
                }
                out.reply = json!({"attenuation": r.attenuation, "dHigh": r.density_high, "dLow": r.density_low});
            }
            (Run::Screening(r), "recognized") => {
                let value = args.bool("value")?.ok_or(ParamError("recognized needs a boolean `value`".into()))?;
                args.finish()?;
                let (high_eye, seed) = r.schedule[r.trials.len()];
                let trial = ScreeningTrial {
                    high_eye,
                    density_high: r.density_high,
                    density_low: r.density_low,
                    seed,
                    outcome: if value {
                        ScreeningOutcome::RecognizedHighNoiseTrial
                    } else {
                        ScreeningOutcome::NotRecognized
                    },
                };
                r.trials.push(trial);
                out.log.push(LogBody::Note { data: json!({"trial": r.trials.len() - 1, "result": trial}) });
                out.reply = json!({"trial": r.trials.len() - 1, "remaining": r.schedule.len() - r.trials.len()});
                if r.trials.len() == r.schedule.len() {
                    r.current = None;
                    out.finished = Some("complete".into());
                } else {
                    let lazy = r.lazy_eye();
                    r.prepare(lazy)?;
                }
            }
            (_, other) => return Err(ParamError(format!("command `{other}` does not apply to this activity"))),
        }
        Ok(out)
    }

    pub(crate) fn summary(&self, ticks: u64, paused_ms: i64) -> BTreeMap<String, Value> {
        let mut m = BTreeMap::new();
        m.insert("ticks".to_string(), json!(ticks));
        m.insert("pausedMs".to_string(), json!(paused_ms));
        match self {
            Run::Invaders(r) => {
                let s = &r.state;
                m.insert("hits".into(), json!(s.hits));
                m.insert("score".into(), json!(s.score));
                m.insert("shotsFired".into(), json!(s.shots_fired));
                m.insert("outcome".into(), json!(s.outcome.map(outcome_name)));
                m.insert("speedTrajectory".into(), json!(r.trajectory));
            }
            Run::Viewer(r) => {
                m.insert("clip".into(), json!(r.dir.display().to_string()));
                m.insert("mask".into(), json!(r.mask_label()));
            }
            Run::Fusion(r) => {
                m.insert("axis".into(), json!(axis_name(r.axis)));
                m.insert("recognized".into(), json!(r.recognized));
            }
            Run::Alignment(r) => {
                let s = r.measurement();
                m.insert("angleDeg".into(), json!(s.angle_deg));
                m.insert("prismDiopters".into(), json!(s.prism_diopters));
                m.insert("offsetPx".into(), json!(s.offset_px));
                m.insert("confirmed".into(), json!(r.state.confirmed));
            }
            Run::Screening(r) => {
                let class = classify_screening(&r.trials).ok();
                m.insert("classification".into(), json!(class));
                m.insert("trials".into(), json!(r.trials));
            }
        }
        m
    }

    /// The confirmed squint measurement, if this was an alignment session.
    pub(crate) fn confirmed_squint(&self) -> Option<SquintMeasurement> {
        match self {
            Run::Alignment(r) if r.state.confirmed => Some(r.measurement()),
            _ => None,
        }
    }
}

fn outcome_name(o: GameOutcome) -> &'static str {
    match o {
        GameOutcome::Won => "won",
        GameOutcome::Lost => "lost",
    }
}

impl ViewerRun {
    fn mask_label(&self) -> String {
        self.mask_name.clone().unwrap_or_else(|| "plan default".to_string())
    }
}

impl AlignmentRun {
    fn measurement(&self) -> SquintMeasurement {
        squint_offset_to_angle(self.state.offset(), self.pitch_mm, self.distance_mm)
            .expect("geometry validated at start")
    }
}

impl ScreeningRun {
    fn lazy_eye(&self) -> dichopt_core::EyeSide {
        self.lazy
    }

    /// Builds the stimulus for the next unreported trial.
    fn prepare(&mut self, lazy: dichopt_core::EyeSide) -> Result<(), ParamError> {
        self.lazy = lazy;
        let (high_eye, seed) = self.schedule[self.trials.len()];
        let stim = make_noise_stimulus(&self.base, self.density_high, self.density_low, high_eye, seed)?;
        self.current = Some(stim.pair);
        Ok(())
    }
}
