use sha2::{Digest, Sha256};

use crate::tensor::Tensor;

/// Named traversal over a model's tensors, in a fixed order.
pub trait Params {
    fn visit<'a>(&'a self, f: &mut dyn FnMut(&str, &'a Tensor));
    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor));

    fn zeros_like(&self) -> Self
    where
        Self: Clone + Sized,
    {
        let mut out = self.clone();
        out.visit_mut(&mut |_, t| t.data.iter_mut().for_each(|v| *v = 0.0));
        out
    }

    fn add_assign(&mut self, other: &Self)
    where
        Self: Sized,
    {
        let mut others = Vec::new();
        other.visit(&mut |_, t| others.push(t));
        let mut i = 0;
        self.visit_mut(&mut |_, t| {
            t.add_assign(others[i]);
            i += 1;
        });
    }

    fn scale(&mut self, factor: f64) {
        self.visit_mut(&mut |_, t| t.scale(factor));
    }

    fn all_finite(&self) -> bool {
        let mut ok = true;
        self.visit(&mut |_, t| ok &= t.is_finite());
        ok
    }

    fn param_count(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |_, t| n += t.len());
        n
    }

    fn names(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.visit(&mut |name, _| out.push(name.to_string()));
        out
    }
}

/// Content hash of every tensor (names, shapes and exact bit patterns).
pub trait ParamHash: Params {
    fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        self.visit(&mut |name, t| {
            h.update(name.as_bytes());
            for d in &t.shape {
                h.update((*d as u64).to_le_bytes());
            }
            for v in &t.data {
                h.update(v.to_bits().to_le_bytes());
            }
        });
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl<T: Params> ParamHash for T {}
