use anyres::netcore::{Checkpoint, CheckpointMeta, DiscriminatorConfig, Generator, GeneratorConfig};
use anyres::resample::warp_to_base;
use anyres::PatchSpec;
use anyres_web::{sample_patch, sampler_stats, warped_view, Demo};
use rand::SeedableRng;

fn small() -> Generator {
    let config = GeneratorConfig {
        patch: 16,
        z_dim: 8,
        w_dim: 8,
        fourier_channels: 12,
        bandwidth: 32.0,
        layers: 2,
        channels: 8,
        scale_max: 64,
        ..GeneratorConfig::default()
    };
    Generator::new(config, &mut rand_chacha::ChaCha8Rng::seed_from_u64(3)).unwrap()
}

fn checkpoint_bytes(g: &Generator) -> Vec<u8> {
    let mut ck = Checkpoint::new(CheckpointMeta {
        phase: 2,
        step: 0,
        seed: 0,
        config_hash: String::new(),
        generator: g.config.clone(),
        discriminator: DiscriminatorConfig {
            patch: 16,
            channels: vec![4],
        },
        extra: serde_json::Value::Null,
    });
    ck.push_generator("G", g);
    ck.to_bytes().unwrap()
}

#[test]
fn checkpoint_bytes_load_into_the_demo() {
    let g = small();
    let demo = match Demo::from_checkpoint(&checkpoint_bytes(&g)) {
        Ok(d) => d,
        Err(_) => panic!("checkpoint rejected"),
    };
    assert_eq!(demo.patch(), 16);
    assert_eq!(demo.scale_max(), 64);
    let Ok(rgba) = demo.sample(4, 40, 0.4, 0.6) else {
        panic!("sample failed")
    };
    assert_eq!(rgba, sample_patch(&g, 4, 40, [0.4, 0.6]).unwrap().to_rgba8());
}

#[test]
fn warped_view_shows_the_warp_on_covered_pixels() {
    let g = small();
    let spec = PatchSpec::new(48, [0.5, 0.5], 16).unwrap();
    let warped = warp_to_base(&sample_patch(&g, 1, 48, [0.5, 0.5]).unwrap(), &spec).unwrap();
    let view = warped_view(&g, 1, 48, [0.5, 0.5]).unwrap();
    for y in 0..16 {
        for x in 0..16 {
            if warped.mask[y * 16 + x] {
                assert_eq!(view.get(y, x), warped.pixels.get(y, x));
            } else {
                let c = view.get(y, x);
                assert!(c == [0.8; 3] || c == [0.6; 3]);
            }
        }
    }
}

#[test]
fn sampler_stats_are_a_function_of_the_seed() {
    let a = sampler_stats(&[64, 128, 256], 64, 1000, 10, 9).unwrap();
    assert_eq!(a, sampler_stats(&[64, 128, 256], 64, 1000, 10, 9).unwrap());
    assert_ne!(a, sampler_stats(&[64, 128, 256], 64, 1000, 10, 10).unwrap());
}
