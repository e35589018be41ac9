use std::ops::AddAssign;

/// Instrumented operation counts for a single kernel invocation.
///
/// `flops` counts two per multiply-add. `memops` counts one per element read
/// plus one per element written while permuting or copying data.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct OpCounter {
    pub flops: u128,
    pub memops: u128,
}

impl OpCounter {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add_flops(&mut self, n: u128) {
        self.flops += n;
    }

    #[inline]
    pub fn add_memops(&mut self, n: u128) {
        self.memops += n;
    }
}

impl AddAssign for OpCounter {
    fn add_assign(&mut self, rhs: Self) {
        self.flops += rhs.flops;
        self.memops += rhs.memops;
    }
}
