use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tacfoot_core::optflow::*;
use tacfoot_core::skin_sim::render_frame;

/// Query image whose content moved by integer `(sx, sy)`, edges clamped.
fn shifted(img: &PatternImage, sx: i32, sy: i32) -> PatternImage {
    let (w, h) = img.dims();
    let mut out = PatternImage::new(w, h, [0; 3]);
    for y in 0..h {
        for x in 0..w {
            let xs = (x as i32 - sx).clamp(0, w as i32 - 1) as usize;
            let ys = (y as i32 - sy).clamp(0, h as i32 - 1) as usize;
            out.set(x, y, img.get(xs, ys));
        }
    }
    out
}

fn epe_const(flow: &DisplacementField, uv: [f32; 2], margin: usize) -> f64 {
    let (w, h) = flow.dims();
    flow.mean_endpoint_error(&DisplacementField::constant(w, h, uv), margin)
        .unwrap()
}

// Independent replay of the candidate draw: three u8 per candidate from one
// ChaCha8 stream, winner maximises the minimum squared distance to the
// up-left, up, up-right and left patches, first candidate on ties.
fn oracle_colours(px: usize, py: usize, k: usize, seed: u64) -> Vec<[u8; 3]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut grid: Vec<[u8; 3]> = Vec::new();
    for y in 0..py {
        for x in 0..px {
            let cands: Vec<[u8; 3]> = (0..k).map(|_| [rng.random(), rng.random(), rng.random()]).collect();
            let mut neigh = Vec::new();
            if y > 0 {
                for nx in [x as i64 - 1, x as i64, x as i64 + 1] {
                    if nx >= 0 && (nx as usize) < px {
                        neigh.push(grid[(y - 1) * px + nx as usize]);
                    }
                }
            }
            if x > 0 {
                neigh.push(grid[y * px + x - 1]);
            }
            let score = |c: [u8; 3]| {
                neigh
                    .iter()
                    .map(|n| (0..3).map(|i| (c[i] as i64 - n[i] as i64).pow(2)).sum::<i64>())
                    .min()
                    .unwrap_or(i64::MAX)
            };
            let mut best = 0;
            for i in 1..k {
                if score(cands[i]) > score(cands[best]) {
                    best = i;
                }
            }
            grid.push(cands[best]);
        }
    }
    grid
}

#[test]
fn pattern_matches_oracle_replay() {
    let img = generate_pattern(2, 2, 1, 8, 42).unwrap();
    let oracle = oracle_colours(2, 2, 8, 42);
    assert_eq!(img.pixels(), &oracle[..]);
    for seed in 0..10u64 {
        let (px, py) = (40, 30);
        let img = generate_pattern(px, py, 4, 8, seed).unwrap();
        let oracle = oracle_colours(px, py, 8, seed);
        for y in 0..py * 4 {
            for x in 0..px * 4 {
                assert_eq!(img.get(x, y), oracle[(y / 4) * px + x / 4]);
            }
        }
    }
}

#[test]
fn camera_sized_pattern() {
    let img = generate_pattern(160, 120, 4, 8, 5).unwrap();
    assert_eq!(img.dims(), (640, 480));
}

#[test]
fn identical_frames_give_zero_flow() {
    let img = generate_pattern(40, 30, 4, 8, 1).unwrap();
    let flow = dis_flow(&img, &img, &FlowParams::default()).unwrap();
    assert!(epe_const(&flow, [0.0, 0.0], 0) < 0.05);
}

#[test]
fn integer_shift_is_recovered() {
    let img = generate_pattern(40, 30, 4, 8, 2).unwrap();
    let flow = dis_flow(&img, &shifted(&img, 3, 0), &FlowParams::default()).unwrap();
    assert!(epe_const(&flow, [3.0, 0.0], 8) < 0.25);
}

#[test]
fn half_pixel_warp_is_recovered() {
    let img = generate_pattern(40, 30, 4, 8, 3).unwrap();
    let (w, h) = img.dims();
    let query = render_frame(&img, &DisplacementField::constant(w, h, [0.5, 0.5])).unwrap();
    let flow = dis_flow(&img, &query, &FlowParams::default()).unwrap();
    assert!(epe_const(&flow, [0.5, 0.5], 8) < 0.5);
}

#[test]
fn dimension_mismatch_is_rejected() {
    let a = generate_pattern(10, 10, 4, 8, 0).unwrap();
    let b = generate_pattern(10, 9, 4, 8, 0).unwrap();
    assert!(dis_flow(&a, &b, &FlowParams::default()).is_err());
    let r = DisReference::new(&a.to_gray(), &FlowParams::default()).unwrap();
    assert!(r.flow(&b.to_gray()).is_err());
}

#[test]
fn bad_params_are_rejected() {
    let a = generate_pattern(10, 10, 4, 8, 0).unwrap();
    for p in [
        FlowParams {
            pyramid_levels: 0,
            ..FlowParams::default()
        },
        FlowParams {
            patch_size: 3,
            ..FlowParams::default()
        },
        FlowParams {
            patch_stride: 9,
            ..FlowParams::default()
        },
    ] {
        assert!(dis_flow(&a, &a, &p).is_err());
    }
}

#[test]
fn cached_reference_matches_one_shot() {
    let img = generate_pattern(30, 20, 4, 8, 4).unwrap();
    let q = shifted(&img, -2, 1);
    let r = DisReference::new(&img.to_gray(), &FlowParams::default()).unwrap();
    assert_eq!(
        r.flow_rgb(&q).unwrap(),
        dis_flow(&img, &q, &FlowParams::default()).unwrap()
    );
}

#[test]
fn more_pyramid_levels_do_not_hurt() {
    let img = generate_pattern(40, 30, 4, 8, 6).unwrap();
    let shifts = [(5, 0), (-4, 3), (2, -5), (-5, -5), (1, 4)];
    let suite = |levels| {
        let p = FlowParams {
            pyramid_levels: levels,
            ..FlowParams::default()
        };
        let r = DisReference::new(&img.to_gray(), &p).unwrap();
        shifts
            .iter()
            .map(|&(sx, sy)| epe_const(&r.flow_rgb(&shifted(&img, sx, sy)).unwrap(), [sx as f32, sy as f32], 8))
            .sum::<f64>()
            / shifts.len() as f64
    };
    let epe: Vec<f64> = (1..=4).map(suite).collect();
    for w in epe.windows(2) {
        assert!(w[1] <= 1.1 * w[0], "{epe:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn integer_shifts_are_equivariant(sx in -5i32..=5, sy in -5i32..=5, seed in 0u64..1000) {
        let img = generate_pattern(40, 30, 4, 8, seed).unwrap();
        let flow = dis_flow(&img, &shifted(&img, sx, sy), &FlowParams::default()).unwrap();
        prop_assert!(epe_const(&flow, [sx as f32, sy as f32], 8) < 0.25);
    }

    #[test]
    fn downsampling_a_constant_is_constant(w in 1usize..40, h in 1usize..40, u in -5.0f32..5.0, v in -5.0f32..5.0) {
        let f = DisplacementField::constant(40, 40, [u, v]);
        let d = f.downsample(w, h).unwrap();
        prop_assert!(d.vectors().iter().all(|x| (x[0] - u).abs() < 1e-5 && (x[1] - v).abs() < 1e-5));
    }
}
