use dichopt_core::diagnostics::{
    alignment_step, box_outline, make_fusion_stimulus, make_noise_stimulus, replay_alignment,
    squint_offset_to_angle, AlignmentCommand, AlignmentState, SplitAxis,
};
use dichopt_core::stereo::overlay;
use dichopt_core::{ComposePolicy, EyeSide, Image, Rgba};
use proptest::prelude::*;

/// Reference splitmix64, written out from the published constants.
struct RefRng(u64);

impl RefRng {
    fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    fn unit(&mut self) -> f64 {
        (self.next() >> 11) as f64 / (1u64 << 53) as f64
    }
}

fn reference_noise(base: &Image, d: f64, rng: &mut RefRng) -> Image {
    let mut out = base.clone();
    for y in 0..base.height() {
        for x in 0..base.width() {
            let u = rng.unit();
            if u < d / 2.0 {
                out.put(x, y, Rgba::BLACK);
            } else if u < d {
                out.put(x, y, Rgba::WHITE);
            }
        }
    }
    out
}

/// Angle whose tangent is `t`, found by bisection on `tan` alone.
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
    (0.5 * (lo + hi)) * 180.0 / std::f64::consts::PI
}

fn mid_grey(w: u32, h: u32) -> Image {
    Image::filled(w, h, Rgba::rgb(128, 128, 128)).unwrap()
}

#[test]
fn noise_matches_reference_stream_and_slices_are_disjoint() {
    let base = Image::from_fn(17, 9, |x, y| Rgba::rgb(x as u8 * 9, y as u8 * 20, 77)).unwrap();
    for seed in [0u64, 1, 42, u64::MAX] {
        for high_eye in [EyeSide::Left, EyeSide::Right] {
            let stim = make_noise_stimulus(&base, 0.6, 0.05, high_eye, seed).unwrap();
            let mut rng = RefRng(seed);
            let high = reference_noise(&base, 0.6, &mut rng);
            let low = reference_noise(&base, 0.05, &mut rng);
            assert_eq!(stim.pair.eye(high_eye), &high);
            assert_eq!(stim.pair.eye(high_eye.other()), &low);
        }
    }
}

#[test]
fn noise_count_is_binomial_like() {
    let base = mid_grey(256, 256);
    let n = 65536.0;
    let sigma = (n * 0.6 * 0.4f64).sqrt();
    let stim = make_noise_stimulus(&base, 0.6, 0.05, EyeSide::Left, 7).unwrap();
    let corrupted = stim.pair.left().pixels().filter(|&p| p != Rgba::rgb(128, 128, 128)).count() as f64;
    assert!((corrupted - n * 0.6).abs() <= 3.0 * sigma, "{corrupted}");
    let black = stim.pair.left().count_color(Rgba::BLACK) as f64;
    assert!((black - n * 0.3).abs() <= 3.0 * (n * 0.3 * 0.7f64).sqrt());
}

#[test]
fn squint_example_matches_bisection_oracle() {
    let m = squint_offset_to_angle((10, 0), 0.25, 500.0).unwrap();
    let expected = bisect_atan_deg(10.0 * 0.25 / 500.0);
    assert!((m.angle_deg - expected).abs() < 1e-9, "{} vs {expected}", m.angle_deg);
    // Prism diopters are 100 * tan(angle), i.e. cm of deviation per metre.
    assert!((m.prism_diopters - 0.5).abs() < 1e-9);
    assert!((m.angle_x_deg - expected).abs() < 1e-9);
    assert_eq!(m.angle_y_deg, 0.0);
}

#[test]
fn fusion_box_halves_reconstruct() {
    let policy = ComposePolicy::default();
    let shape = box_outline(40, 30, 3, Rgba::WHITE, policy.clear_color).unwrap();
    for axis in [SplitAxis::Vertical, SplitAxis::Horizontal] {
        let stim = make_fusion_stimulus(&shape, axis, &policy).unwrap();
        let merged = overlay(stim.pair.left(), stim.pair.right(), policy.clear_color).unwrap();
        assert_eq!(merged, shape);
        let stroke = shape.count_color(Rgba::WHITE);
        assert_eq!(stim.pair.left().count_color(Rgba::WHITE) + stim.pair.right().count_color(Rgba::WHITE), stroke);
    }
}

fn arb_shape() -> impl Strategy<Value = Image> {
    (2u32..20, 2u32..20).prop_flat_map(|(w, h)| {
        proptest::collection::vec(prop_oneof![Just(Rgba::BLACK), Just(Rgba::WHITE), Just(Rgba::rgb(9, 200, 3))], (w * h) as usize)
            .prop_map(move |px| Image::from_fn(w, h, |x, y| px[(y * w + x) as usize]).unwrap())
    })
}

proptest! {
    #[test]
    fn fusion_split_is_a_partition(shape in arb_shape(), vertical in any::<bool>(), lazy_left in any::<bool>()) {
        let axis = if vertical { SplitAxis::Vertical } else { SplitAxis::Horizontal };
        let lazy = if lazy_left { EyeSide::Left } else { EyeSide::Right };
        let policy = ComposePolicy::with_lazy_eye(lazy);
        let clear = policy.clear_color;
        let stim = make_fusion_stimulus(&shape, axis, &policy).unwrap();
        for y in 0..shape.height() {
            for x in 0..shape.width() {
                let p = shape.get(x, y);
                let l = stim.pair.left().get(x, y) != clear;
                let r = stim.pair.right().get(x, y) != clear;
                if p != clear {
                    prop_assert!(l ^ r);
                } else {
                    prop_assert!(!l && !r);
                }
            }
        }
        prop_assert_eq!(overlay(stim.pair.left(), stim.pair.right(), clear).unwrap(), shape);
    }

    #[test]
    fn noise_is_deterministic(seed in any::<u64>(), dh in 0.0f64..=1.0, frac in 0.0f64..=1.0, left in any::<bool>()) {
        let eye = if left { EyeSide::Left } else { EyeSide::Right };
        let base = mid_grey(9, 7);
        let a = make_noise_stimulus(&base, dh, dh * frac, eye, seed).unwrap();
        let b = make_noise_stimulus(&base, dh, dh * frac, eye, seed).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn squint_is_odd_and_monotone(
        dx in -2000i32..2000,
        dy in -2000i32..2000,
        extra in 1i32..50,
        pitch in 0.01f64..2.0,
        dist in 50.0f64..5000.0,
        more in 1.0f64..1000.0,
    ) {
        let m = squint_offset_to_angle((dx, dy), pitch, dist).unwrap();
        let neg = squint_offset_to_angle((-dx, -dy), pitch, dist).unwrap();
        prop_assert_eq!(neg.angle_x_deg, -m.angle_x_deg);
        prop_assert_eq!(neg.angle_y_deg, -m.angle_y_deg);
        prop_assert_eq!(neg.angle_deg, m.angle_deg);
        let bigger = squint_offset_to_angle((dx.abs() + extra, dy.abs()), pitch, dist).unwrap();
        prop_assert!(bigger.angle_deg > squint_offset_to_angle((dx.abs(), dy.abs()), pitch, dist).unwrap().angle_deg);
        if (dx, dy) != (0, 0) {
            let farther = squint_offset_to_angle((dx, dy), pitch, dist + more).unwrap();
            prop_assert!(farther.angle_deg < m.angle_deg);
        }
    }

    #[test]
    fn alignment_script_replays(moves in proptest::collection::vec((-5i32..6, -5i32..6), 0..30), confirm in any::<bool>()) {
        let start = AlignmentState::centered((100, 80), 20);
        let mut live = start.clone();
        let mut script: Vec<AlignmentCommand> = moves.iter().map(|&(dx, dy)| AlignmentCommand::Translate { dx, dy }).collect();
        if confirm {
            script.push(AlignmentCommand::Confirm);
        }
        for &cmd in &script {
            live = alignment_step(&live, cmd).unwrap();
        }
        let logged = serde_json::to_string(&live.history).unwrap();
        let parsed: Vec<AlignmentCommand> = serde_json::from_str(&logged).unwrap();
        prop_assert_eq!(replay_alignment(&start, &parsed).unwrap(), live.clone());
        let sum = moves.iter().fold((0, 0), |a, m| (a.0 + m.0, a.1 + m.1));
        prop_assert_eq!(live.offset(), sum);
        prop_assert_eq!(live.confirmed, confirm);
    }
}

#[test]
fn noise_counts_over_many_seeds_look_binomial() {
    let base = mid_grey(256, 256);
    let (n, d) = (65536.0f64, 0.6);
    let sigma = (n * d * (1.0 - d)).sqrt();
    let zs: Vec<f64> = (0..100u64)
        .map(|seed| {
            let stim = make_noise_stimulus(&base, d, 0.05, EyeSide::Right, seed).unwrap();
            let c = stim.pair.right().pixels().filter(|&p| p != Rgba::rgb(128, 128, 128)).count() as f64;
            (c - n * d) / sigma
        })
        .collect();
    // Exceedances of 3 sigma are Binomial(100, 0.0027); more than 3 is a 1-in-4000 event.
    assert!(zs.iter().filter(|z| z.abs() > 3.0).count() <= 3);
    let pooled = zs.iter().sum::<f64>() / 10.0;
    assert!(pooled.abs() < 3.0, "pooled z {pooled}");
    let var = zs.iter().map(|z| z * z).sum::<f64>() / 100.0;
    assert!((0.6..1.5).contains(&var), "z variance {var}");
}
