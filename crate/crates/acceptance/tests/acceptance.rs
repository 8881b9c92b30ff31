//! Runs every headline criterion at its stated tolerance and prints one
//! PASS/FAIL line each. Exits non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration as StdDuration, Instant};

use chrono::{DateTime, Duration, NaiveDate, TimeZone, Utc};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use serde_json::{json, Value};

use dichopt_core::diagnostics::{make_noise_stimulus, squint_offset_to_angle};
use dichopt_core::digest::sha256_hex;
use dichopt_core::game::{
    new_game, render_frame, replay, step, write_event_log, DifficultyController, DifficultyParams, GameConfig,
    GameInput, GameState,
};
use dichopt_core::persistence::{
    compliance_report, load_patient, save_patient, Acuity, Activity, GameOverrides, PatientProfile, SessionRecord,
    Store, StoreConfig, TherapySettings,
};
use dichopt_core::stereo::{compose, encode_frame_sequential};
use dichopt_core::{ComposePolicy, EyeAssignment, EyeSide, Image, Rgba, SceneLayer, StereoError, StereoPair};
use dichopt_service::eventlog::{game_config_from_log, game_events_from_log, inputs_from_log, parse_log, steps_from_log};
use dichopt_service::{ConnId, Envelope, ManualClock, ServiceConfig, SessionService};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn main() {
    let criteria: Vec<Criterion> = vec![
        ("frame alternation", frame_alternation),
        ("dichoptic exclusivity", dichoptic_exclusivity),
        ("fusion-anchor gate", fusion_anchor_gate),
        ("squint conversion", squint_conversion),
        ("determinism and replay", determinism_and_replay),
        ("adaptive difficulty", adaptive_difficulty),
        ("noise statistics", noise_statistics),
        ("persistence", persistence),
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    let mut out = std::io::stdout().lock();
    for (name, check) in criteria {
        let t = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".to_string());
            Err(format!("panic: {msg}"))
        });
        let ms = t.elapsed().as_millis();
        match result {
            Ok(detail) => writeln!(out, "PASS {name} ({ms} ms): {detail}").unwrap(),
            Err(reason) => {
                failed += 1;
                writeln!(out, "FAIL {name} ({ms} ms): {reason}").unwrap();
            }
        }
    }
    out.flush().unwrap();
    if failed > 0 {
        std::process::exit(1);
    }
}

// --- frame alternation -------------------------------------------------------

fn synthetic_pair(i: u32) -> StereoPair {
    let img = |eye: u8| {
        Image::from_fn(16, 8, |x, y| Rgba([(i % 256) as u8, (i / 256) as u8 ^ eye, (x * 16 + y) as u8, 255])).unwrap()
    };
    StereoPair::new(img(0), img(0x80)).unwrap()
}

fn frame_alternation() -> Check {
    let pairs: Vec<StereoPair> = (0..120).map(synthetic_pair).collect();
    let t = Instant::now();
    let stream = encode_frame_sequential(&pairs, 120).map_err(|e| e.to_string())?;
    ensure!(stream.len() == 240, "{} frames", stream.len());
    // Even/odd extraction done here, not through the stream's own helpers.
    let frames = stream.frames();
    let even: Vec<&Image> = frames.iter().step_by(2).map(|(_, f)| f).collect();
    let odd: Vec<&Image> = frames.iter().skip(1).step_by(2).map(|(_, f)| f).collect();
    for (i, p) in pairs.iter().enumerate() {
        ensure!(even[i] == p.left() && odd[i] == p.right(), "pair {i} not reconstructed");
    }
    ensure!(frames.iter().enumerate().all(|(i, (tag, _))| tag.eye == if i % 2 == 0 { EyeSide::Left } else { EyeSide::Right }), "tags out of phase");
    // Simulated display clock: frame i is shown at i/120 s.
    let mut per_second: BTreeMap<(u128, bool), usize> = BTreeMap::new();
    for i in 0..frames.len() as u64 {
        let at = stream.presentation_time(i);
        *per_second.entry((at.as_nanos() / 1_000_000_000, i % 2 == 0)).or_default() += 1;
    }
    ensure!(per_second.len() == 2 * 2 && per_second.values().all(|&n| n == 60), "per-second counts {per_second:?}");
    ensure!(stream.eye_stream(EyeSide::Left).len() == 120 && stream.eye_stream(EyeSide::Right).len() == 120, "eye stream lengths");
    let back = stream.to_pairs().map_err(|e| e.to_string())?;
    ensure!(back == pairs, "to_pairs differs");
    let elapsed = t.elapsed();
    ensure!(elapsed < StdDuration::from_secs(1), "took {elapsed:?}");
    Ok(format!("240 frames, 60/s per eye, bit-exact, {elapsed:?}"))
}

// --- dichoptic exclusivity ----------------------------------------------------

fn scripted(n: u32) -> Vec<GameInput> {
    (0..n)
        .map(|t| {
            let phase = (t / 45) % 4;
            GameInput {
                left: phase == 1 || (phase == 3 && t % 3 == 0),
                right: phase == 0 || phase == 3,
                fire: t % 7 == 0 || (t % 13 == 5 && phase != 2),
            }
        })
        .collect()
}

/// The whole scene painted with plain rectangle fills.
fn full_scene(state: &GameState) -> Image {
    let cfg = &state.config;
    let (w, h) = (cfg.field_w, cfg.field_h);
    let mut img = Image::filled(w, h, Rgba::BLACK).unwrap();
    let mut fill = |x0: i32, y0: i32, fw: u32, fh: u32, c: Rgba| {
        for y in y0.max(0)..(y0 + fh as i32).min(h as i32) {
            for x in x0.max(0)..(x0 + fw as i32).min(w as i32) {
                img.put(x as u32, y as u32, c);
            }
        }
    };
    let a = cfg.palette.anchors;
    fill(0, 0, w, 2, a);
    fill(0, h as i32 - 2, w, 2, a);
    fill(0, 0, 2, h, a);
    fill(w as i32 - 2, 0, 2, h, a);
    for r in 0..cfg.invader_rows {
        for c in 0..cfg.invader_cols {
            if state.alive[(r * cfg.invader_cols + c) as usize] {
                let (x, y) = state.invader_pos(cfg, r, c);
                fill(x, y, cfg.invader_size.0, cfg.invader_size.1, cfg.palette.invader);
            }
        }
    }
    let craft_y = (h - cfg.craft_margin - cfg.craft_size.1) as i32;
    fill(state.craft_x, craft_y, cfg.craft_size.0, cfg.craft_size.1, cfg.palette.craft);
    for s in &state.shots {
        fill(s.x, s.y, cfg.shot_size.0, cfg.shot_size.1, cfg.palette.shot);
    }
    img
}

fn dichoptic_exclusivity() -> Check {
    let mut sampled = 0;
    let mut with_shots = 0;
    for lazy in [EyeSide::Right, EyeSide::Left] {
        let policy = ComposePolicy::with_lazy_eye(lazy);
        let mut state = new_game(&GameConfig::default()).map_err(|e| e.to_string())?;
        for (t, input) in scripted(600).into_iter().enumerate() {
            if state.over {
                break;
            }
            if (t % 6 == 0 && lazy == EyeSide::Right) || (t % 60 == 3 && lazy == EyeSide::Left) {
                let pair = render_frame(&state, &policy).map_err(|e| e.to_string())?;
                let fellow = pair.eye(lazy.other());
                let p = state.config.palette;
                ensure!(fellow.count_color(p.craft) == 0, "tick {t}: craft pixels in fellow eye");
                ensure!(fellow.count_color(p.shot) == 0, "tick {t}: shot pixels in fellow eye");
                ensure!(pair.eye(lazy) == &full_scene(&state), "tick {t}: lazy eye differs from the full scene");
                sampled += 1;
                with_shots += usize::from(!state.shots.is_empty());
            }
            state = step(&state, input).map_err(|e| e.to_string())?.0;
        }
    }
    ensure!(sampled >= 100, "only {sampled} ticks sampled");
    ensure!(with_shots > 10, "only {with_shots} samples had shots in flight");
    Ok(format!("{sampled} ticks, {with_shots} with shots in flight, exact"))
}

// --- fusion-anchor gate -------------------------------------------------------

fn gate_frame(shared: u32, total: u32) -> Result<StereoPair, StereoError> {
    let layers = vec![
        SceneLayer::new("both", Image::filled(shared, 1, Rgba::WHITE).unwrap(), (0, 0), EyeAssignment::Both, 0),
        SceneLayer::new(
            "lazy",
            Image::filled(total - shared, 1, Rgba::rgb(255, 0, 0)).unwrap(),
            (shared as i32, 0),
            EyeAssignment::LazyOnly,
            1,
        ),
    ];
    compose(&layers, &ComposePolicy::default(), (total, 1))
}

fn fusion_anchor_gate() -> Check {
    let mut lines = Vec::new();
    for total in [1000u32, 2000, 5000] {
        let at = total / 10;
        for (shared, expect_ok) in [(at - 1, false), (at, true), (at + 1, true)] {
            let r = gate_frame(shared, total);
            match (&r, expect_ok) {
                (Ok(_), true) | (Err(StereoError::SharedContentTooLow { .. }), false) => {}
                _ => return Err(format!("{shared}/{total}: got {r:?}")),
            }
        }
        lines.push(format!("{}/{total}", at));
    }
    Ok(format!("rejects one pixel below and accepts at and above 0.10 ({})", lines.join(", ")))
}

// --- squint conversion --------------------------------------------------------

/// Angle whose tangent is `t`, by bisection on `tan`.
fn bisect_atan_deg(t: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, std::f64::consts::FRAC_PI_2);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid.tan() < t {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (0.5 * (lo + hi)).to_degrees()
}

fn squint_conversion() -> Check {
    let m = squint_offset_to_angle((10, 0), 0.25, 500.0).map_err(|e| e.to_string())?;
    let oracle = bisect_atan_deg(10.0 * 0.25 / 500.0);
    let err = (m.angle_deg - oracle).abs();
    ensure!(err.le(&1e-9), "angle {} vs oracle {oracle}", m.angle_deg);
    ensure!((m.prism_diopters - 0.5).abs().le(&1e-9), "prism {}", m.prism_diopters);

    let mut runner = TestRunner::new(Config { cases: 1000, failure_persistence: None, ..Config::default() });
    let strategy = (-2000i32..=2000, -2000i32..=2000, 1i32..=500, 0.05f64..2.0, 100.0f64..5000.0);
    runner
        .run(&strategy, |(dx, dy, step, pitch, dist)| {
            let a = squint_offset_to_angle((dx, dy), pitch, dist).unwrap();
            let neg = squint_offset_to_angle((-dx, -dy), pitch, dist).unwrap();
            prop_assert_eq!(neg.angle_x_deg, -a.angle_x_deg);
            prop_assert_eq!(neg.angle_y_deg, -a.angle_y_deg);
            prop_assert_eq!(neg.angle_deg, a.angle_deg);
            let further = squint_offset_to_angle((dx.abs() + step, 0), pitch, dist).unwrap();
            let nearer = squint_offset_to_angle((dx.abs(), 0), pitch, dist).unwrap();
            prop_assert!(further.angle_deg > nearer.angle_deg);
            prop_assert!(further.angle_x_deg > nearer.angle_x_deg);
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok(format!("|error| {err:.1e} deg; odd and monotone over 1000 inputs"))
}

// --- determinism and replay ---------------------------------------------------

fn run_hashes(inputs: &[GameInput]) -> (String, String) {
    let (state, log) = replay(&GameConfig::default(), inputs.iter().copied()).unwrap();
    let mut bytes = Vec::new();
    write_event_log(&mut bytes, &log).unwrap();
    (state.digest(), sha256_hex(&bytes))
}

fn determinism_and_replay() -> Check {
    let script = scripted(600);
    let runs: Vec<(String, String)> = (0..3).map(|_| run_hashes(&script)).collect();
    ensure!(runs.iter().all(|r| r == &runs[0]), "hashes differ across runs: {runs:?}");

    // Same script through the service: handshake, start, key envelopes, stop.
    let dir = tempfile::tempdir().unwrap();
    let store = Store::open(dir.path()).unwrap();
    store.insert_patient(&PatientProfile::new("p-1", EyeSide::Right)).unwrap();
    let clock = ManualClock::new(Utc.with_ymd_and_hms(2026, 1, 5, 9, 0, 0).unwrap());
    let mut svc = SessionService::new(store, clock.clone(), ServiceConfig::default());
    let mut seqs: BTreeMap<ConnId, u64> = BTreeMap::new();
    let mut send = |svc: &mut SessionService<ManualClock>, conn: ConnId, t: &str, payload: Value| {
        let seq = seqs.entry(conn).or_default();
        *seq += 1;
        svc.handle_message(conn, Envelope::new(t, *seq, payload))
    };
    let (c, p) = (svc.connect(), svc.connect());
    send(&mut svc, c, "hello", json!({"role": "clinician", "proto": 1}));
    send(&mut svc, p, "hello", json!({"role": "patient", "proto": 1, "encoding": "seq"}));
    let out = send(&mut svc, c, "start", json!({"activity": "invaders", "patientId": "p-1"}));
    ensure!(out.iter().any(|(_, e)| e.t == "started"), "start failed: {out:?}");
    let mut held = GameInput::IDLE;
    let mut envelopes = 0;
    for &want in &script {
        let mut keys = Vec::new();
        if want.left != held.left {
            keys.push(("left", want.left));
        }
        if want.right != held.right {
            keys.push(("right", want.right));
        }
        if want.fire {
            keys.push(("fire", true));
            keys.push(("fire", false));
        }
        for (key, down) in keys {
            let out = send(&mut svc, p, "input", json!({"key": key, "action": if down { "down" } else { "up" }}));
            ensure!(out.is_empty(), "input rejected: {out:?}");
            envelopes += 1;
        }
        held = want;
        svc.tick();
        clock.advance(Duration::milliseconds(16));
    }
    let service_digest = svc.game_state().unwrap().digest();
    let out = send(&mut svc, c, "stop", json!({}));
    let summary = out.iter().find(|(_, e)| e.t == "summary").map(|(_, e)| e.payload.clone()).ok_or("no summary")?;
    ensure!(summary["persisted"] == true, "summary not persisted: {summary}");

    let (direct, direct_events) = replay(&GameConfig::default(), script.iter().copied()).unwrap();
    ensure!(service_digest == direct.digest(), "service state differs from the direct run");
    let record = svc.store().load_all_sessions("p-1").unwrap().records.pop().ok_or("no record")?;
    let s = &record.summary;
    ensure!(
        s["hits"] == json!(direct.hits) && s["shotsFired"] == json!(direct.shots_fired) && s["score"] == json!(direct.score)
            && s["ticks"] == json!(direct.tick),
        "persisted summary {s:?} differs from replay"
    );
    let entries = parse_log(&std::fs::read_to_string(dir.path().join(&record.event_log_ref)).unwrap()).map_err(|e| e.to_string())?;
    ensure!(game_events_from_log(&entries) == direct_events, "logged events differ from the direct run");
    let logged_inputs = inputs_from_log(&entries, steps_from_log(&entries).ok_or("no finish entry")?);
    let cfg = game_config_from_log(&entries).ok_or("no game config in log")?;
    let (again, _) = replay(&cfg, logged_inputs).unwrap();
    ensure!(again.digest() == service_digest, "replay of the logged mapping differs");
    Ok(format!(
        "3 runs identical (state {}..); service run of {envelopes} input envelopes equals library replay",
        &runs[0].0[..12]
    ))
}

// --- adaptive difficulty --------------------------------------------------------

/// Speeds after each window for a hit pattern repeated every ten shots.
fn trajectory(hits_per_ten: usize, windows: usize, start: f64) -> Vec<u32> {
    let params = DifficultyParams::default();
    let mut c = DifficultyController::new(start, &params, 64, true);
    let mut out = vec![c.speed_fixed()];
    for _ in 0..windows {
        for i in 0..10 {
            c.record(i < hits_per_ten, &params);
        }
        out.push(c.speed_fixed());
    }
    out
}

fn adaptive_difficulty() -> Check {
    let p = DifficultyParams::default();
    let (min, max) = ((p.speed_min * 256.0).round() as u32, (p.speed_max * 256.0).round() as u32);
    let up = trajectory(8, 20, 1.0);
    let top = up.iter().position(|&s| s == max).ok_or(format!("80% never reached max: {up:?}"))?;
    ensure!(up[..=top].windows(2).all(|w| w[1] > w[0]), "80% not strictly increasing: {up:?}");
    ensure!(up[top..].iter().all(|&s| s == max), "80% left max: {up:?}");
    let down = trajectory(1, 20, 1.0);
    let bottom = down.iter().position(|&s| s == min).ok_or(format!("10% never reached min: {down:?}"))?;
    ensure!(down[..=bottom].windows(2).all(|w| w[1] < w[0]), "10% not strictly decreasing: {down:?}");
    ensure!(down[bottom..].iter().all(|&s| s == min), "10% left min: {down:?}");
    for start in [0.5, 1.0, 2.5, 4.0] {
        let flat = trajectory(5, 20, start);
        ensure!(flat.iter().all(|&s| s == flat[0]), "50% moved from {start}: {flat:?}");
    }
    Ok(format!("80%: {} windows to max; 10%: {} windows to min; 50%: constant", top, bottom))
}

// --- noise statistics -----------------------------------------------------------

fn noise_statistics() -> Check {
    let base = Image::filled(256, 256, Rgba::rgb(128, 128, 128)).unwrap();
    let n = 65536.0f64;
    let d = 0.6;
    let (mean, sigma) = (n * d, (n * d * (1.0 - d)).sqrt());
    let mut outside = Vec::new();
    let mut worst: f64 = 0.0;
    let mut total = 0.0;
    for seed in 0..100u64 {
        let stim = make_noise_stimulus(&base, d, 0.05, EyeSide::Left, seed).map_err(|e| e.to_string())?;
        let high = stim.pair.eye(EyeSide::Left);
        let count = high.pixels().filter(|&px| px != Rgba::rgb(128, 128, 128)).count() as f64;
        let z = (count - mean) / sigma;
        worst = worst.max(z.abs());
        total += count;
        if z.abs() > 3.0 {
            outside.push(format!("seed {seed}: {count} (z={z:.2})"));
        }
        let again = make_noise_stimulus(&base, d, 0.05, EyeSide::Left, seed).map_err(|e| e.to_string())?;
        ensure!(again.pair == stim.pair, "seed {seed} not reproducible");
    }
    let pooled = (total - 100.0 * mean) / (100.0 * n * d * (1.0 - d)).sqrt();
    ensure!(
        outside.is_empty(),
        "outside 3 sigma: {} (pooled z over all seeds {pooled:.2}; a fair generator puts at least one of 100 seeds past 3 sigma about 24% of the time)",
        outside.join("; ")
    );
    Ok(format!("100 seeds within 3 sigma (max |z| {worst:.2}); same seed bit-identical"))
}

// --- persistence ----------------------------------------------------------------

fn arb_unit() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.0), Just(1.0), 0.0f64..=1.0]
}

fn arb_positive() -> impl Strategy<Value = f64> {
    prop_oneof![Just(1.0), 1e-6f64..1e6]
}

fn arb_profile() -> impl Strategy<Value = PatientProfile> {
    let assignment = prop_oneof![Just(EyeAssignment::Both), Just(EyeAssignment::LazyOnly), Just(EyeAssignment::FellowOnly)];
    let game = (
        proptest::option::of(arb_positive()),
        proptest::option::of(arb_positive()),
        proptest::option::of(arb_positive()),
        proptest::option::of(assignment),
    )
        .prop_map(|(base_speed, speed_min, speed_max, invaders)| GameOverrides { base_speed, speed_min, speed_max, invaders });
    let squint = proptest::option::of((-500i32..500, -500i32..500, arb_positive(), arb_positive()))
        .prop_map(|s| s.map(|(dx, dy, p, d)| squint_offset_to_angle((dx, dy), p, d).unwrap()));
    (
        "[A-Za-z0-9_-]{1,24}",
        any::<bool>(),
        proptest::option::of(1900i32..2100),
        proptest::option::of((0.0f64..3.0, 0.0f64..3.0)),
        (arb_unit(), arb_unit(), game),
        squint,
    )
        .prop_map(|(id, left, birth_year, acuity, (att, ratio, game), squint_calibration)| PatientProfile {
            id,
            amblyopic_eye: if left { EyeSide::Left } else { EyeSide::Right },
            birth_year,
            acuity: acuity.map(|(lazy, fellow)| Acuity { lazy, fellow }),
            therapy: TherapySettings { fellow_attenuation: att, min_shared_ratio: ratio, game },
            squint_calibration,
        })
}

fn arb_value() -> impl Strategy<Value = Value> {
    let leaf = prop_oneof![
        Just(Value::Null),
        any::<bool>().prop_map(Value::from),
        any::<i64>().prop_map(Value::from),
        (-1e12f64..1e12).prop_map(Value::from),
        "[ -~]{0,12}".prop_map(Value::from),
    ];
    leaf.prop_recursive(2, 8, 4, |inner| proptest::collection::vec(inner, 0..4).prop_map(Value::from))
}

fn arb_record() -> impl Strategy<Value = SessionRecord> {
    (
        "[A-Za-z0-9_-]{1,24}",
        0usize..Activity::ALL.len(),
        1_577_836_800_000i64..1_893_456_000_000,
        0i64..(6 * 3600 * 1000),
        proptest::collection::vec(arb_value(), 8),
    )
        .prop_map(|(sid, a, start_ms, dur, values)| {
            let activity = Activity::ALL[a];
            let start: DateTime<Utc> = Utc.timestamp_millis_opt(start_ms).unwrap();
            let summary = activity.summary_keys().iter().zip(values).map(|(k, v)| (k.to_string(), v)).collect();
            SessionRecord::new(sid, "p-1", activity, start, start + Duration::milliseconds(dur), summary)
        })
}

fn persistence() -> Check {
    let config = Config { cases: 1000, failure_persistence: None, ..Config::default() };
    TestRunner::new(config.clone())
        .run(&arb_profile(), |p| {
            let bytes = save_patient(&p).unwrap();
            let back = load_patient(&bytes).unwrap();
            prop_assert_eq!(&back, &p);
            prop_assert_eq!(save_patient(&back).unwrap(), bytes);
            Ok(())
        })
        .map_err(|e| format!("patient XML: {e}"))?;
    TestRunner::new(config)
        .run(&arb_record(), |r| {
            let line = r.to_line();
            let back = SessionRecord::from_line(&line).unwrap();
            prop_assert_eq!(&back, &r);
            prop_assert_eq!(back.to_line(), line);
            Ok(())
        })
        .map_err(|e| format!("session line: {e}"))?;

    let sessions = proptest::collection::vec((0i64..(30 * 24 * 60), 0i64..(3 * 3600 * 1000)), 0..60);
    let strategy = (sessions, -12 * 60..=14 * 60, 0i64..30, 0i64..30);
    TestRunner::new(Config { cases: 64, failure_persistence: None, ..Config::default() })
        .run(&strategy, |(sessions, offset, lo, span)| {
            let dir = tempfile::tempdir().unwrap();
            let mut store = Store::open(dir.path()).unwrap();
            store.set_config(StoreConfig { utc_offset_minutes: offset }).unwrap();
            store.insert_patient(&PatientProfile::new("p-1", EyeSide::Left)).unwrap();
            let epoch = Utc.with_ymd_and_hms(2025, 12, 20, 0, 0, 0).unwrap();
            let summary: BTreeMap<String, Value> =
                Activity::Viewer.summary_keys().iter().map(|k| (k.to_string(), json!(0))).collect();
            let mut records = Vec::new();
            for (i, (m, ms)) in sessions.iter().enumerate() {
                let start = epoch + Duration::minutes(*m);
                let r = SessionRecord::new(format!("s{i}"), "p-1", Activity::Viewer, start, start + Duration::milliseconds(*ms), summary.clone());
                store.append_session(&r).unwrap();
                records.push(r);
            }
            let from = NaiveDate::from_ymd_opt(2025, 12, 19).unwrap() + Duration::days(lo);
            let to = from + Duration::days(span);
            let report = compliance_report(&store, "p-1", from, to).unwrap();
            // Brute force: local start day, whole minutes rounded up.
            let mut per_day: BTreeMap<NaiveDate, u64> = BTreeMap::new();
            for r in &records {
                let day = (r.start_utc + Duration::minutes(offset.into())).date_naive();
                if (from..=to).contains(&day) {
                    let ms = (r.end_utc - r.start_utc).num_milliseconds() as u64;
                    *per_day.entry(day).or_default() += ms.div_ceil(60_000);
                }
            }
            prop_assert_eq!(&report.per_day_minutes, &per_day);
            prop_assert_eq!(report.total_minutes, per_day.values().sum::<u64>());
            Ok(())
        })
        .map_err(|e| format!("compliance: {e}"))?;
    Ok("1000 profiles and 1000 records bit-exact; compliance equals brute force over 64 stores".to_string())
}
