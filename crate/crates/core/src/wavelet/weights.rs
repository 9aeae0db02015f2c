//! Deterministic block parameters and their tensor-file encoding.

use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensorio::{read_tensors, write_tensors, FeatureMap};

/// xorshift64* seeded through splitmix64 so that seed 0 is usable.
#[derive(Debug, Clone)]
pub struct XorShift64Star {
    state: u64,
}

impl XorShift64Star {
    pub fn new(seed: u64) -> Self {
        let mut z = seed.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
        Self {
            state: if z == 0 { 0x2545_F491_4F6C_DD1D } else { z },
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.state;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.state = x;
        x.wrapping_mul(0x2545_F491_4F6C_DD1D)
    }

    /// Uniform on `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `[-s, s)`.
    pub fn symmetric(&mut self, s: f64) -> f64 {
        (2.0 * self.next_f64() - 1.0) * s
    }
}

/// Parameters of the non-local block and the 3x3 refinement convolution.
///
/// Matrices are row-major: `theta_w`, `phi_w`, `g_w` are `embed x channels`,
/// `out_w` is `channels x embed`, `refine_w` is `[out][in][3][3]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockWeights<T> {
    pub channels: usize,
    pub embed: usize,
    pub theta_w: Vec<T>,
    pub phi_w: Vec<T>,
    pub g_w: Vec<T>,
    pub out_w: Vec<T>,
    pub refine_w: Vec<T>,
    pub refine_b: Vec<T>,
    pub seed: Option<u64>,
}

impl<T: Scalar> BlockWeights<T> {
    pub fn zeros(channels: usize, embed: usize) -> Self {
        let z = |n| vec![T::zero(); n];
        Self {
            channels,
            embed,
            theta_w: z(embed * channels),
            phi_w: z(embed * channels),
            g_w: z(embed * channels),
            out_w: z(channels * embed),
            refine_w: z(channels * channels * 9),
            refine_b: z(channels),
            seed: None,
        }
    }

    /// Replaces the refinement conv with the identity (center tap 1, bias 0).
    pub fn with_identity_refine(mut self) -> Self {
        let c = self.channels;
        self.refine_w = vec![T::zero(); c * c * 9];
        for o in 0..c {
            self.refine_w[(o * c + o) * 9 + 4] = T::one();
        }
        self.refine_b = vec![T::zero(); c];
        self
    }

    pub fn validate(&self) -> Result<()> {
        let (c, e) = (self.channels, self.embed);
        if c == 0 || e == 0 {
            return Err(Error::Config("block weights need channels, embed >= 1".into()));
        }
        let expect = [
            ("theta_w", self.theta_w.len(), e * c),
            ("phi_w", self.phi_w.len(), e * c),
            ("g_w", self.g_w.len(), e * c),
            ("out_w", self.out_w.len(), c * e),
            ("refine_w", self.refine_w.len(), c * c * 9),
            ("refine_b", self.refine_b.len(), c),
        ];
        for (name, got, want) in expect {
            if got != want {
                return Err(Error::Config(format!("{name} has {got} values, expected {want}")));
            }
        }
        let all = [
            &self.theta_w,
            &self.phi_w,
            &self.g_w,
            &self.out_w,
            &self.refine_w,
            &self.refine_b,
        ];
        if all.iter().any(|v| v.iter().any(|x| !x.is_finite())) {
            return Err(Error::Validation("non-finite block weight".into()));
        }
        Ok(())
    }

    pub fn cast<U: Scalar>(&self) -> BlockWeights<U> {
        let c = |v: &Vec<T>| v.iter().map(|x| x.cast()).collect();
        BlockWeights {
            channels: self.channels,
            embed: self.embed,
            theta_w: c(&self.theta_w),
            phi_w: c(&self.phi_w),
            g_w: c(&self.g_w),
            out_w: c(&self.out_w),
            refine_w: c(&self.refine_w),
            refine_b: c(&self.refine_b),
            seed: self.seed,
        }
    }

    /// Encodes as six tensor records: theta, phi, g (`1 x embed x channels`),
    /// out (`1 x channels x embed`), refine kernel (`channels^2 x 3 x 3`) and
    /// bias (`1 x 1 x channels`).
    pub fn to_tensors(&self) -> Result<Vec<FeatureMap<f32>>> {
        self.validate()?;
        let (c, e) = (self.channels, self.embed);
        let f = |v: &Vec<T>| v.iter().map(|x| x.cast::<f32>()).collect::<Vec<f32>>();
        Ok(vec![
            FeatureMap::new(1, e, c, f(&self.theta_w))?,
            FeatureMap::new(1, e, c, f(&self.phi_w))?,
            FeatureMap::new(1, e, c, f(&self.g_w))?,
            FeatureMap::new(1, c, e, f(&self.out_w))?,
            FeatureMap::new(c * c, 3, 3, f(&self.refine_w))?,
            FeatureMap::new(1, 1, c, f(&self.refine_b))?,
        ])
    }

    pub fn from_tensors(ts: &[FeatureMap<f32>]) -> Result<Self> {
        let [theta, phi, g, out, refine, bias] = ts else {
            return Err(Error::Format(format!("expected 6 weight records, found {}", ts.len())));
        };
        let (_, e, c) = theta.dims();
        let expect = [
            (theta.dims(), (1, e, c)),
            (phi.dims(), (1, e, c)),
            (g.dims(), (1, e, c)),
            (out.dims(), (1, c, e)),
            (refine.dims(), (c * c, 3, 3)),
            (bias.dims(), (1, 1, c)),
        ];
        if let Some((got, want)) = expect.iter().find(|(got, want)| got != want) {
            return Err(Error::Format(format!("weight record dims {got:?}, expected {want:?}")));
        }
        let v = |t: &FeatureMap<f32>| t.data().iter().map(|x| x.cast::<T>()).collect();
        let w = Self {
            channels: c,
            embed: e,
            theta_w: v(theta),
            phi_w: v(phi),
            g_w: v(g),
            out_w: v(out),
            refine_w: v(refine),
            refine_b: v(bias),
            seed: None,
        };
        w.validate()?;
        Ok(w)
    }
}

/// Seeded uniform(-s, s) weights with `s = 1 / sqrt(channels)`.
///
/// Draw order: theta, phi, g, out, refine kernel, refine bias.
pub fn make_weights<T: Scalar>(channels: usize, embed: usize, seed: u64) -> Result<BlockWeights<T>> {
    if channels == 0 || embed == 0 {
        return Err(Error::Config("make_weights needs channels, embed >= 1".into()));
    }
    let mut rng = XorShift64Star::new(seed);
    let s = 1.0 / (channels as f64).sqrt();
    let mut draw = |n: usize| (0..n).map(|_| T::lit(rng.symmetric(s))).collect::<Vec<T>>();
    let (c, e) = (channels, embed);
    let theta_w = draw(e * c);
    let phi_w = draw(e * c);
    let g_w = draw(e * c);
    let out_w = draw(c * e);
    let refine_w = draw(c * c * 9);
    let refine_b = draw(c);
    Ok(BlockWeights {
        channels,
        embed,
        theta_w,
        phi_w,
        g_w,
        out_w,
        refine_w,
        refine_b,
        seed: Some(seed),
    })
}

pub fn read_weights(path: impl AsRef<Path>) -> Result<BlockWeights<f32>> {
    BlockWeights::from_tensors(&read_tensors(path)?)
}

pub fn write_weights<T: Scalar>(w: &BlockWeights<T>, path: impl AsRef<Path>) -> Result<()> {
    write_tensors(&w.to_tensors()?, path)
}
