use anyres::datapipe::{sample_real_patch, Branch, Dataset, SamplingPolicy, Split};
use anyres::eval::{Embedder, FeatureAccumulator};
use anyres::geometry::{make_canonical_grid, patch_grid, PatchSpec};
use anyres::netcore::{Discriminator, DiscriminatorConfig, Generator, GeneratorConfig};
use anyres::resample::{resample, warp_to_base, BaseWarp};
use anyres::train::{teacher_loss, TeacherWeights};
use anyres::Image;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const L1: TeacherWeights = TeacherWeights {
    l1: 1.0,
    perceptual: 0.0,
};

fn noise(h: usize, w: usize, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Image::from_fn(h, w, |_, _| [rng.random(), rng.random(), rng.random()])
}

fn admissible(s: u32, p: u32, fx: f64, fy: f64) -> PatchSpec {
    let (lo, hi) = anyres::geometry::center_bounds(s, p);
    PatchSpec::new(s, [lo + fx * (hi - lo), lo + fy * (hi - lo)], p).unwrap()
}

fn small_generator(kernel: usize, seed: u64) -> Generator {
    let cfg = GeneratorConfig {
        patch: 12,
        z_dim: 8,
        w_dim: 8,
        mapping_layers: 2,
        fourier_channels: 12,
        bandwidth: 16.0,
        layers: 2,
        channels: 8,
        kernel,
        scale_max: 96,
    };
    Generator::new(cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

fn latent(dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn global_patch_is_the_canonical_lattice(p in 1usize..64) {
        let a = patch_grid(&PatchSpec::global(p as u32)).unwrap();
        let b = make_canonical_grid(p).unwrap();
        for i in 0..p {
            for j in 0..p {
                let want = [(j as f64 + 0.5) / p as f64, (i as f64 + 0.5) / p as f64];
                prop_assert!((a.at(i, j)[0] - want[0]).abs() < 1e-12);
                prop_assert!((a.at(i, j)[1] - want[1]).abs() < 1e-12);
                // the canonical lattice is the same one, centred on the origin
                prop_assert!((b.at(i, j)[0] + 0.5 - want[0]).abs() < 1e-12);
                prop_assert!((b.at(i, j)[1] + 0.5 - want[1]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pixel_aligned_patches_nest_in_the_full_lattice(
        p in 2u32..24, extra in 0u32..100, ft in 0.0f64..1.0, fl in 0.0f64..1.0,
    ) {
        let s = p + extra;
        let top = (ft * (s - p) as f64).floor() as u32;
        let left = (fl * (s - p) as f64).floor() as u32;
        let g = patch_grid(&PatchSpec::from_pixel_offset(s, p, top, left).unwrap()).unwrap();
        for i in 0..p as usize {
            for j in 0..p as usize {
                let want = [
                    (left as f64 + j as f64 + 0.5) / s as f64,
                    (top as f64 + i as f64 + 0.5) / s as f64,
                ];
                prop_assert!((g.at(i, j)[0] - want[0]).abs() < 1e-12);
                prop_assert!((g.at(i, j)[1] - want[1]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn resample_preserves_constants(h in 2usize..40, w in 2usize..40, oh in 1usize..60, ow in 1usize..60, c in 0.0f64..1.0) {
        let out = resample(&Image::filled(h, w, [c, 1.0 - c, 0.5]), oh, ow).unwrap();
        for px in out.data().chunks_exact(3) {
            prop_assert!((px[0] - c).abs() < 1e-12);
            prop_assert!((px[1] - (1.0 - c)).abs() < 1e-12);
            prop_assert!((px[2] - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn resample_to_same_size_is_identity(h in 1usize..40, w in 1usize..40, seed in any::<u64>()) {
        let img = noise(h, w, seed);
        prop_assert_eq!(resample(&img, h, w).unwrap(), img);
    }

    #[test]
    fn resample_is_linear(
        h in 2usize..32, w in 2usize..32, oh in 1usize..48, ow in 1usize..48,
        a in -2.0f64..2.0, b in -2.0f64..2.0, seed in any::<u64>(),
    ) {
        let x = noise(h, w, seed);
        let y = noise(h, w, seed.wrapping_add(1));
        let mix = Image::from_vec(h, w, x.data().iter().zip(y.data()).map(|(u, v)| a * u + b * v).collect()).unwrap();
        let lhs = resample(&mix, oh, ow).unwrap();
        let (rx, ry) = (resample(&x, oh, ow).unwrap(), resample(&y, oh, ow).unwrap());
        for ((l, u), v) in lhs.data().iter().zip(rx.data()).zip(ry.data()) {
            prop_assert!((l - (a * u + b * v)).abs() < 1e-10);
        }
    }

    #[test]
    fn warp_at_base_scale_is_identity(p in 1u32..40, seed in any::<u64>()) {
        let img = noise(p as usize, p as usize, seed);
        let out = warp_to_base(&img, &PatchSpec::global(p)).unwrap();
        prop_assert!(out.mask.iter().all(|&m| m));
        prop_assert!(out.pixels.max_abs_diff(&img) < 1e-12);
    }

    #[test]
    fn warp_mask_is_a_rectangle_of_the_right_area(
        p in 4u32..48, extra in 0u32..400, fx in 0.0f64..1.0, fy in 0.0f64..1.0,
    ) {
        let s = p + extra;
        let warp = BaseWarp::new(&admissible(s, p, fx, fy)).unwrap();
        let mask = warp.mask();
        let n = p as usize;
        let side = (p * p) as f64 / s as f64;
        if warp.covered() == 0 {
            // A patch footprint under one base pixel may cover no centre.
            prop_assert!(side < 2.0);
            return Ok(());
        }
        let rows: Vec<usize> = (0..n).filter(|&i| mask[i * n..(i + 1) * n].iter().any(|&m| m)).collect();
        let cols: Vec<usize> = (0..n).filter(|&j| (0..n).any(|i| mask[i * n + j])).collect();
        prop_assert_eq!(warp.covered(), rows.len() * cols.len());
        // contiguous on both axes
        prop_assert_eq!(rows.last().unwrap() - rows[0] + 1, rows.len());
        prop_assert_eq!(cols.last().unwrap() - cols[0] + 1, cols.len());
        prop_assert!((rows.len() as f64 - side).abs() <= 1.0);
        prop_assert!((cols.len() as f64 - side).abs() <= 1.0);
    }

    #[test]
    fn teacher_loss_is_nonnegative(p in 4u32..24, extra in 0u32..100, fx in 0.0f64..1.0, fy in 0.0f64..1.0, seed in any::<u64>()) {
        let spec = admissible(p + extra, p, fx, fy);
        let n = p as usize;
        let out = teacher_loss(&noise(n, n, seed), &spec, &noise(n, n, !seed), L1, None).unwrap();
        prop_assert!(out.value >= 0.0);
    }

    #[test]
    fn teacher_loss_equals_a_constant_offset(
        p in 4u32..24, extra in 0u32..100, fx in 0.0f64..1.0, fy in 0.0f64..1.0,
        c in -0.5f64..0.5, seed in any::<u64>(),
    ) {
        let spec = admissible(p + extra, p, fx, fy);
        let n = p as usize;
        let patch = noise(n, n, seed);
        // A teacher that agrees with the patch wherever it is compared.
        let base = warp_to_base(&patch, &spec).unwrap().pixels;
        let matched = teacher_loss(&patch, &spec, &base, L1, None).unwrap();
        prop_assert!(matched.value.abs() < 1e-12);
        let shifted = patch.map(|v| v + c);
        let moved = teacher_loss(&shifted, &spec, &base, L1, None).unwrap();
        let want = if moved.covered > 0 { c.abs() } else { 0.0 };
        prop_assert!((moved.value - want).abs() < 1e-9, "loss {} offset {}", moved.value, c);
    }

    #[test]
    fn accumulator_merge_is_associative(seed in any::<u64>(), na in 1usize..20, nb in 1usize..20, nc in 1usize..20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = 5;
        let mut fill = |n: usize| {
            let mut acc = FeatureAccumulator::new(dim);
            for _ in 0..n {
                let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-3.0..3.0)).collect();
                acc.push(&x).unwrap();
            }
            acc
        };
        let (a, b, c) = (fill(na), fill(nb), fill(nc));
        let left = a.merge(&b).unwrap().merge(&c).unwrap().finish().unwrap();
        let right = a.merge(&b.merge(&c).unwrap()).unwrap().finish().unwrap();
        prop_assert_eq!(left.n, right.n);
        for (x, y) in left.mu.iter().zip(&right.mu).chain(left.sigma.iter().zip(&right.sigma)) {
            prop_assert!((x - y).abs() <= 1e-10);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn replayed_plans_give_the_same_pixels(seed in any::<u64>(), draw in 0u64..1000) {
        let items = vec![
            ("a".to_string(), Split::High, noise(40, 56, seed)),
            ("b".to_string(), Split::High, noise(48, 48, seed ^ 1)),
            ("c".to_string(), Split::Low, noise(16, 16, seed ^ 2)),
        ];
        let dataset = Dataset::from_images(items).unwrap();
        let policy = SamplingPolicy::new(dataset.manifest(), 16, 0.5, 16, None).unwrap();
        let stream = anyres::SeedStream::new(seed);
        let first = sample_real_patch(&dataset, &policy, Branch::Mixed, &mut stream.rng("real", 0, draw)).unwrap();
        let again = sample_real_patch(&dataset, &policy, Branch::Mixed, &mut stream.rng("real", 0, draw)).unwrap();
        prop_assert_eq!(&first, &again);
        prop_assert_eq!(dataset.extract(&first.plan).unwrap(), first.pixels);
    }

    #[test]
    fn generator_is_translation_consistent(
        kernel in prop::sample::select(vec![1usize, 3]),
        extra in 4u32..60, ft in 0.0f64..1.0, fl in 0.0f64..1.0,
        dy in 0u32..4, dx in 0u32..4, seed in 0u64..50,
    ) {
        let g = small_generator(kernel, seed);
        let p = g.patch();
        let s = p + extra;
        let top = (ft * (s - p - dy) as f64) as u32;
        let left = (fl * (s - p - dx) as f64) as u32;
        let z = latent(8, seed);
        let a = g.synthesize_patch(&z, &PatchSpec::from_pixel_offset(s, p, top, left).unwrap()).unwrap();
        let b = g.synthesize_patch(&z, &PatchSpec::from_pixel_offset(s, p, top + dy, left + dx).unwrap()).unwrap();
        let (dy, dx) = (dy as usize, dx as usize);
        for i in 0..p as usize - dy {
            for j in 0..p as usize - dx {
                let (u, v) = (a.get(i + dy, j + dx), b.get(i, j));
                for c in 0..3 {
                    prop_assert!((u[c] - v[c]).abs() < 1e-9, "pixel ({i},{j}) {:?} vs {:?}", u, v);
                }
            }
        }
    }

    #[test]
    fn tiled_render_matches_monolithic(kernel in prop::sample::select(vec![1usize, 3]), res in 12u32..60, seed in 0u64..50) {
        let g = small_generator(kernel, seed);
        let z = latent(8, seed + 1);
        let tiled = g.synthesize_image(&z, res).unwrap();
        let whole = g.synthesize_image_monolithic(&z, res).unwrap();
        prop_assert!(tiled.max_abs_diff(&whole) < 1e-9);
    }

    #[test]
    fn construction_and_synthesis_are_deterministic(seed in any::<u64>()) {
        let (a, b) = (small_generator(3, seed), small_generator(3, seed));
        prop_assert_eq!(&a, &b);
        let z = latent(8, seed);
        let spec = admissible(40, 12, 0.3, 0.7);
        prop_assert_eq!(a.synthesize_patch(&z, &spec).unwrap(), b.synthesize_patch(&z, &spec).unwrap());
    }

    #[test]
    fn r1_penalty_is_nonnegative(seed in any::<u64>()) {
        let cfg = DiscriminatorConfig { patch: 16, channels: vec![4, 8] };
        let d = Discriminator::new(cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let out = d.r1_penalty(&noise(16, 16, seed).map(|v| 2.0 * v - 1.0)).unwrap();
        prop_assert!(out.penalty >= 0.0 && out.penalty.is_finite());
    }

    #[test]
    fn embedder_is_a_function_of_its_seed(seed in 0u64..1000, img_seed in any::<u64>()) {
        let img = noise(64, 64, img_seed);
        let a = Embedder::standard(seed).embed(&img).unwrap();
        let b = Embedder::standard(seed).embed(&img).unwrap();
        prop_assert_eq!(a, b);
    }
}
