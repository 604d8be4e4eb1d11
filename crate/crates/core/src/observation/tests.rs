use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::mdp_env::{VehicleSlot, LANE1_SLOTS, LANE2_SLOTS};
use crate::traffic_sim::{GeometryConfig, Lane, RoadTopology, SimConfig, SimState, TopologyKind};

fn scales() -> BsmScales {
    let topo = RoadTopology::build(TopologyKind::Taper, &GeometryConfig::default()).unwrap();
    BsmScales::for_topology(&topo, 13.89, 50.0)
}

fn slot(v: f64, x: f64, y: f64, acc: f64) -> VehicleSlot {
    VehicleSlot { v, x, y, acc, present: true }
}

fn raw_with(slots: [VehicleSlot; 7]) -> RawState {
    RawState {
        ego: slots[0],
        lane1: std::array::from_fn(|i| slots[1 + i]),
        lane2: std::array::from_fn(|i| slots[1 + LANE1_SLOTS + i]),
        img: ImageFrame::blank(8, 8),
    }
}

#[test]
fn zero_kinematics_encode_to_zero_speed_and_accel() {
    let raw = raw_with([slot(0.0, 100.0, 0.0, 0.0); 7]);
    let b = encode_bsm(&raw, &scales());
    assert!(b.0[..14].iter().all(|&v| v == 0.0));
}

#[test]
fn v_max_encodes_to_one() {
    let raw = raw_with([slot(13.89, 100.0, 0.0, 0.0); 7]);
    let b = encode_bsm(&raw, &scales());
    assert!(b.0[..7].iter().all(|&v| v == 1.0));
}

#[test]
fn sentinels_encode_finitely() {
    let mut slots = [VehicleSlot::sentinel(450.0, 0.0); 7];
    slots[0] = slot(5.0, 0.0, -3.2, 1.0);
    let b = encode_bsm(&raw_with(slots), &scales());
    assert!(b.0.iter().all(|v| v.is_finite()));
    assert_eq!(b.0[14 + 3], 1.0);
    assert_eq!(LANE2_SLOTS + LANE1_SLOTS + 1, 7);
}

proptest! {
    #[test]
    fn decode_inverts_encode(vals in proptest::collection::vec((0.0f64..13.89, -10.0f64..460.0, -5.0f64..5.0, -8.0f64..8.0), 7)) {
        let s = scales();
        let slots: [VehicleSlot; 7] = std::array::from_fn(|i| slot(vals[i].0, vals[i].1, vals[i].2, vals[i].3));
        let decoded = decode_bsm(&encode_slots(&slots, &s), &s);
        for (d, o) in decoded.iter().zip(slots.iter()) {
            prop_assert!((d.0 - o.v).abs() < 1e-9);
            prop_assert!((d.1 - o.acc).abs() < 1e-9);
            prop_assert!((d.2 - o.x).abs() < 1e-9);
            prop_assert!((d.3 - o.y).abs() < 1e-9);
        }
    }
}

fn quiet_sim() -> SimState {
    SimState::new(SimConfig { flow_rate: 0.0, ..Default::default() }, 0).unwrap()
}

#[test]
fn empty_road_has_no_vehicle_pixels() {
    let frame = rasterize(&quiet_sim(), &WindowConfig::default());
    assert_eq!(frame.count(VEHICLE) + frame.count(EGO), 0);
    assert!(frame.count(ROAD) > 0 && frame.count(MARKING) > 0);
    assert!(frame.data.iter().all(|&v| [BACKGROUND, ROAD, MARKING].contains(&v)));
}

#[test]
fn vehicle_footprint_matches_pixel_geometry() {
    let window = WindowConfig::default();
    let (mx, my) = (window.meters_per_px_x(), window.meters_per_px_y());
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..100 {
        let mut sim = quiet_sim();
        let pos = rng.gen_range(262.0..345.0);
        let lane = if rng.gen() { Lane::Lane1 } else { Lane::Lane2 };
        sim.place_vehicle(lane, pos, 10.0).unwrap();
        let frame = rasterize(&sim, &window);
        let rows: Vec<usize> = (0..frame.height)
            .filter(|&r| (0..frame.width).any(|c| frame.get(r, c) == VEHICLE))
            .collect();
        let cols: Vec<usize> = (0..frame.width)
            .filter(|&c| (0..frame.height).any(|r| frame.get(r, c) == VEHICLE))
            .collect();
        let expect_cols = 5.0 / mx;
        let expect_rows = 1.8 / my;
        assert!((cols.len() as f64 - expect_cols).abs() <= 1.0, "cols {}", cols.len());
        assert!((rows.len() as f64 - expect_rows).abs() <= 1.0, "rows {}", rows.len());
        assert_eq!(frame.count(VEHICLE), rows.len() * cols.len());
    }
}

#[test]
fn rasterize_is_deterministic() {
    let mut sim = SimState::new(SimConfig::default(), 4).unwrap();
    for _ in 0..400 {
        sim.advance();
    }
    sim.spawn_ego_at(290.0, 10.0);
    let w = WindowConfig::default();
    let a = rasterize(&sim, &w);
    assert_eq!(a, rasterize(&sim, &w));
    assert!(a.count(EGO) > 0);
}

#[test]
fn ppm_layout() {
    let frame = ImageFrame::filled(3, 2, 7);
    let mut out = Vec::new();
    frame.write_ppm(&mut out).unwrap();
    let header = b"P6\n3 2\n255\n";
    assert_eq!(&out[..header.len()], header);
    assert_eq!(out.len(), header.len() + 18);
}

fn bsm_marker(k: usize) -> BsmVector {
    let mut b = BsmVector::zeros();
    b.0[0] = k as f64;
    b
}

#[test]
fn stack_is_fifo_of_depth_four() {
    let img = ImageFrame::blank(2, 2);
    let mut stack = StackedObservation::reset(bsm_marker(0), img.clone());
    assert!(stack.bsm.iter().all(|b| b.0[0] == 0.0));
    for k in 1..=4 {
        stack.push(bsm_marker(k), img.clone());
    }
    let order: Vec<f64> = stack.bsm.iter().map(|b| b.0[0]).collect();
    assert_eq!(order, vec![1.0, 2.0, 3.0, 4.0]);
}

#[test]
fn stack_matches_ring_buffer_trace() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let img = ImageFrame::blank(1, 1);
    let mut stack = StackedObservation::reset(bsm_marker(0), img.clone());
    let mut ring = [0usize; 4];
    let mut head = 0;
    for _ in 0..100 {
        let k = rng.gen_range(0..1000);
        stack.push(bsm_marker(k), img.clone());
        ring[head] = k;
        head = (head + 1) % 4;
        let expected: Vec<f64> = (0..4).map(|i| ring[(head + i) % 4] as f64).collect();
        let got: Vec<f64> = stack.bsm.iter().map(|b| b.0[0]).collect();
        assert_eq!(got, expected);
    }
}

fn present_raw() -> RawState {
    raw_with([slot(10.0, 100.0, 0.0, 0.5); 7])
}

#[test]
fn zero_level_bsm_noise_is_identity() {
    let spec = NoiseSpec { level: 0.0, ..Default::default() };
    let mut raw = present_raw();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    augment_bsm(&mut raw, &spec, &mut rng);
    assert_eq!(raw, present_raw());
}

fn noise_samples(level: f64, field: impl Fn(&VehicleSlot) -> f64, n: usize) -> Vec<f64> {
    let spec = NoiseSpec { level, ..Default::default() };
    let base = present_raw();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let mut raw = base.clone();
        augment_bsm(&mut raw, &spec, &mut rng);
        for (a, b) in raw.slots().iter().zip(base.slots().iter()) {
            out.push(field(a) - field(b));
        }
    }
    out.truncate(n);
    out
}

fn moments(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[test]
fn full_level_speed_noise_moments() {
    let xs = noise_samples(1.0, |s| s.v, 100_000);
    let (mean, std) = moments(&xs);
    let se = 1.0 / (xs.len() as f64).sqrt();
    assert!((mean - 0.2777).abs() < 3.0 * se, "mean {mean}");
    assert!((std - 1.0).abs() < 0.02, "std {std}");
}

#[test]
fn half_level_position_noise_mean() {
    let xs = noise_samples(0.5, |s| s.x, 100_000);
    let (mean, std) = moments(&xs);
    let se = 0.5 / (xs.len() as f64).sqrt();
    assert!((mean - 0.75).abs() < 3.0 * se, "mean {mean}");
    assert!((std - 0.5).abs() < 0.01);
}

#[test]
fn sentinels_are_not_perturbed() {
    let mut raw = present_raw();
    raw.lane2[3] = VehicleSlot::sentinel(450.0, 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    augment_bsm(&mut raw, &NoiseSpec::default(), &mut rng);
    assert_eq!(raw.lane2[3], VehicleSlot::sentinel(450.0, 0.0));
}

#[test]
fn zero_level_image_noise_is_identity() {
    let spec = NoiseSpec { level: 0.0, ..Default::default() };
    let img = rasterize(&quiet_sim(), &WindowConfig::default());
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert_eq!(augment_image(&img, &spec, &mut rng), img);
}

#[test]
fn uniform_image_is_blur_invariant() {
    let img = ImageFrame::filled(20, 15, 123);
    for sigma in [0.3, 1.0, 2.5] {
        assert_eq!(blur_with_sigma(&img, sigma), img);
    }
}

#[test]
fn impulse_blur_matches_dense_convolution() {
    let (w, h) = (21usize, 21usize);
    let mut data = vec![0.0; w * h];
    data[10 * w + 10] = 255.0;
    let sigma = 1.0;
    let blurred = gaussian_blur_f64(&data, w, h, sigma);
    // Dense 2-D kernel built directly from the sampled Gaussian.
    let radius = 2i64;
    let mut k2 = vec![vec![0.0; 5]; 5];
    let mut total = 0.0;
    for i in -radius..=radius {
        for j in -radius..=radius {
            let v = (-((i * i + j * j) as f64) / (2.0 * sigma * sigma)).exp();
            k2[(i + radius) as usize][(j + radius) as usize] = v;
            total += v;
        }
    }
    for r in 0..h as i64 {
        for c in 0..w as i64 {
            let mut acc = 0.0;
            for i in -radius..=radius {
                for j in -radius..=radius {
                    let (rr, cc) = (r - i, c - j);
                    if (0..h as i64).contains(&rr) && (0..w as i64).contains(&cc) {
                        acc += k2[(i + radius) as usize][(j + radius) as usize] / total
                            * data[rr as usize * w + cc as usize];
                    }
                }
            }
            assert!((acc - blurred[r as usize * w + c as usize]).abs() < 1e-9);
        }
    }
}

#[test]
fn blur_conserves_mean_intensity() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let data: Vec<u8> = (0..84 * 84).map(|_| rng.gen()).collect();
        let img = ImageFrame { width: 84, height: 84, data };
        let out = blur_with_sigma(&img, rng.gen_range(0.1..1.0));
        let mean = |f: &ImageFrame| f.data.iter().map(|&v| v as f64).sum::<f64>() / f.data.len() as f64;
        let rel = (mean(&out) - mean(&img)).abs() / mean(&img);
        assert!(rel < 0.005, "relative drift {rel}");
    }
}

#[test]
fn noise_percent_scaling() {
    let spec = NoiseSpec::default();
    assert_eq!(scale_noise(&spec, 100.0).unwrap().level, 1.0);
    assert_eq!(scale_noise(&spec, 25.0).unwrap().level, 0.25);
    assert_eq!(scale_noise(&spec, 0.0).unwrap().level, 0.0);
    assert!(scale_noise(&spec, 120.0).is_err());
    assert!(scale_noise(&spec, -1.0).is_err());
}

#[test]
fn ablation_zero_fills_without_changing_shapes() {
    let mut raw = present_raw();
    raw.img = ImageFrame::filled(8, 8, 99);
    for modality in [Modality::BsmOnly, Modality::ImageOnly, Modality::Multi] {
        let mut pipe = ObservationPipeline::new(scales(), modality, None, 0);
        let stack = pipe.reset(&raw).clone();
        assert_eq!(stack.bsm_flat().len(), 4 * BSM_LEN);
        assert_eq!(stack.img_flat().len(), 4 * 64);
        let bsm_zero = stack.bsm_flat().iter().all(|&v| v == 0.0);
        let img_zero = stack.img_flat().iter().all(|&v| v == 0);
        assert_eq!(bsm_zero, modality == Modality::ImageOnly);
        assert_eq!(img_zero, modality == Modality::BsmOnly);
    }
}

#[test]
fn noise_free_pipeline_matches_plain_encoding() {
    let raw = present_raw();
    let mut clean = ObservationPipeline::new(scales(), Modality::Multi, None, 1);
    let mut zero = ObservationPipeline::new(
        scales(),
        Modality::MultiAugmented,
        Some(NoiseSpec { level: 0.0, ..Default::default() }),
        2,
    );
    assert_eq!(clean.reset(&raw), zero.reset(&raw));
    assert_eq!(clean.push(&raw), zero.push(&raw));
}
