use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::PatchSpec;
use crate::image::Image;
use crate::nn::{lrelu_backward, lrelu_forward, Conv2d};
use crate::resample::BaseWarp;

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Non-saturating logistic losses `(loss_D, loss_G)`.
pub fn nonsat_losses(real_logit: f64, fake_logit: f64) -> (f64, f64) {
    (
        softplus(-real_logit) + softplus(fake_logit),
        softplus(-fake_logit),
    )
}

/// Derivatives `(dL_D/d real, dL_D/d fake, dL_G/d fake)`.
pub fn nonsat_grads(real_logit: f64, fake_logit: f64) -> (f64, f64, f64) {
    (-sigmoid(-real_logit), sigmoid(fake_logit), -sigmoid(-fake_logit))
}

/// A differentiable image distance.
pub trait PerceptualDistance {
    fn id(&self) -> String;
    /// Distance and its gradient with respect to `a`.
    fn distance(&self, a: &Image, b: &Image) -> Result<(f64, Image)>;
}

/// Mean absolute difference of features from two fixed random
/// convolutions (3x3, 3 -> 8, then 3x3 stride 2, 8 -> 16), summed over the
/// two layers.
#[derive(Clone, Debug)]
pub struct RandomConvDistance {
    seed: u64,
    convs: [Conv2d; 2],
}

impl RandomConvDistance {
    pub fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = Conv2d::new(3, 8, 3, 1, 1, &mut rng);
        let b = Conv2d::new(8, 16, 3, 2, 1, &mut rng);
        Self { seed, convs: [a, b] }
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

impl PerceptualDistance for RandomConvDistance {
    fn id(&self) -> String {
        format!("randconv-l1-s{}", self.seed)
    }

    fn distance(&self, a: &Image, b: &Image) -> Result<(f64, Image)> {
        if a.height() != b.height() || a.width() != b.width() {
            return Err(Error::invalid("perceptual distance needs equal sizes"));
        }
        let run = |img: &Image| {
            let x = img.map(|v| 2.0 * v - 1.0).to_feature_map();
            let (mut f1, c1) = self.convs[0].forward(&x);
            lrelu_forward(&mut f1.data);
            let (mut f2, c2) = self.convs[1].forward(&f1);
            lrelu_forward(&mut f2.data);
            (f1, c1, f2, c2)
        };
        let (a1, ac1, a2, ac2) = run(a);
        let (b1, _, b2, _) = run(b);
        let (n1, n2) = (a1.data.len() as f64, a2.data.len() as f64);
        let mut value = 0.0;
        let mut g2 = a2.clone();
        for ((g, x), y) in g2.data.iter_mut().zip(&a2.data).zip(&b2.data) {
            value += (x - y).abs() / n2;
            *g = sign(x - y) / n2;
        }
        lrelu_backward(&a2.data, &mut g2.data);
        let mut g1 = self.convs[1].backward_input(&ac2, &g2);
        for ((g, x), y) in g1.data.iter_mut().zip(&a1.data).zip(&b1.data) {
            value += (x - y).abs() / n1;
            *g += sign(x - y) / n1;
        }
        lrelu_backward(&a1.data, &mut g1.data);
        let mut g0 = self.convs[0].backward_input(&ac1, &g1);
        g0.data.iter_mut().for_each(|v| *v *= 2.0);
        Ok((value, Image::from_feature_map(g0)?))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TeacherWeights {
    pub l1: f64,
    pub perceptual: f64,
}

#[derive(Clone, Debug)]
pub struct TeacherLoss {
    pub value: f64,
    /// Gradient with respect to the generated patch.
    pub grad: Image,
    pub covered: usize,
}

/// Distance between a generated patch, projected into the base frame, and
/// the teacher's base image on the pixels the patch covers. The L1 term is
/// a mean over covered pixels and channels.
pub fn teacher_loss(
    patch: &Image,
    spec: &PatchSpec,
    teacher_base: &Image,
    weights: TeacherWeights,
    perceptual: Option<&dyn PerceptualDistance>,
) -> Result<TeacherLoss> {
    let p = spec.patch as usize;
    if teacher_base.height() != p || teacher_base.width() != p {
        return Err(Error::invalid("teacher base image must be p x p"));
    }
    let warp = BaseWarp::new(spec)?;
    let covered = warp.covered();
    if covered == 0 {
        return Ok(TeacherLoss {
            value: 0.0,
            grad: Image::new(p, p),
            covered,
        });
    }
    let warped = warp.apply(patch)?;
    let mut target = teacher_base.clone();
    for (px, &m) in target.data_mut().chunks_exact_mut(3).zip(&warped.mask) {
        if !m {
            px.fill(0.0);
        }
    }
    let mut grad_base = Image::new(p, p);
    let mut value = 0.0;
    if weights.l1 > 0.0 {
        let denom = (3 * covered) as f64;
        let mut sum = 0.0;
        for (i, &m) in warped.mask.iter().enumerate() {
            if !m {
                continue;
            }
            for c in 0..3 {
                let d = warped.pixels.data()[i * 3 + c] - target.data()[i * 3 + c];
                sum += d.abs();
                grad_base.data_mut()[i * 3 + c] += weights.l1 * sign(d) / denom;
            }
        }
        value += weights.l1 * sum / denom;
    }
    if weights.perceptual > 0.0 {
        if let Some(d) = perceptual {
            let (v, g) = d.distance(&warped.pixels, &target)?;
            value += weights.perceptual * v;
            for (a, b) in grad_base.data_mut().iter_mut().zip(g.data()) {
                *a += weights.perceptual * b;
            }
        }
    }
    Ok(TeacherLoss {
        value,
        grad: warp.adjoint(&grad_base),
        covered,
    })
}
