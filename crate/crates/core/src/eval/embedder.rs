use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::image::Image;
use crate::nn::Conv2d;
use crate::resample::resample;

/// Fixed random convolutional feature extractor standing in for a
/// pretrained network. Images are resized to `input x input` with the
/// Lanczos resampler, passed through stride-2 3x3 convolutions with ReLU,
/// and average-pooled.
#[derive(Clone, Debug)]
pub struct Embedder {
    id: String,
    input: usize,
    convs: Vec<Conv2d>,
}

impl Embedder {
    pub const DEFAULT_INPUT: usize = 64;
    pub const DEFAULT_CHANNELS: [usize; 4] = [16, 32, 64, 128];

    pub fn new(input: usize, channels: &[usize], seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut convs = Vec::new();
        let mut c_in = 3;
        for &c in channels {
            convs.push(Conv2d::new(c_in, c, 3, 2, 1, &mut rng));
            c_in = c;
        }
        let id = format!(
            "randconv-{input}-{}-s{seed}",
            channels.iter().map(|c| c.to_string()).collect::<Vec<_>>().join("x")
        );
        Self { id, input, convs }
    }

    pub fn standard(seed: u64) -> Self {
        Self::new(Self::DEFAULT_INPUT, &Self::DEFAULT_CHANNELS, seed)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn input_size(&self) -> usize {
        self.input
    }

    pub fn dim(&self) -> usize {
        self.convs.last().map_or(3, |c| c.out_ch())
    }

    pub fn embed(&self, img: &Image) -> Result<Vec<f64>> {
        let resized;
        let img = if img.height() == self.input && img.width() == self.input {
            img
        } else {
            resized = resample(img, self.input, self.input)?;
            &resized
        };
        let mut x = img.map(|v| 2.0 * v - 1.0).to_feature_map();
        for conv in &self.convs {
            let (mut y, _) = conv.forward(&x);
            y.data.iter_mut().for_each(|v| *v = v.max(0.0));
            x = y;
        }
        let c = x.channels;
        let mut out = vec![0.0; c];
        for px in x.data.chunks_exact(c) {
            for (o, v) in out.iter_mut().zip(px) {
                *o += v;
            }
        }
        let n = x.pixels() as f64;
        out.iter_mut().for_each(|v| *v /= n);
        Ok(out)
    }
}
