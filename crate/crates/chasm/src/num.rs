//! Field storage scalar: 64-bit by default, 32-bit to halve the memory of
//! large fields. All arithmetic runs in f64; storage converts at the edges.

pub trait Real: Copy + Send + Sync + PartialOrd + std::fmt::Debug + 'static {
    const NAME: &'static str;
    fn to_f64(self) -> f64;
    fn from_f64(v: f64) -> Self;
    fn is_finite(self) -> bool;
    fn zero() -> Self;
}

impl Real for f64 {
    const NAME: &'static str = "f64";
    #[inline]
    fn to_f64(self) -> f64 {
        self
    }
    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }
    #[inline]
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
    #[inline]
    fn zero() -> Self {
        0.0
    }
}

impl Real for f32 {
    const NAME: &'static str = "f32";
    #[inline]
    fn to_f64(self) -> f64 {
        self as f64
    }
    #[inline]
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    #[inline]
    fn is_finite(self) -> bool {
        f32::is_finite(self)
    }
    #[inline]
    fn zero() -> Self {
        0.0
    }
}
