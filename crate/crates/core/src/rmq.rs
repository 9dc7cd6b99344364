/// Sparse table for O(1) range arg-min / arg-max queries over a fixed f64
/// array. Stores u32 indices layer-major; ties resolve to the leftmost
/// position. Build is O(n log n) time and memory.
#[derive(Debug)]
pub struct RmqTable {
    n: usize,
    values: Vec<f64>,
    // layers[k][i] = best index in [i, i + 2^k)
    layers: Vec<Vec<u32>>,
    take_min: bool,
}

impl RmqTable {
    pub fn build_min(values: &[f64]) -> Self {
        Self::build(values, true)
    }

    pub fn build_max(values: &[f64]) -> Self {
        Self::build(values, false)
    }

    fn build(values: &[f64], take_min: bool) -> Self {
        let n = values.len();
        assert!(n > 0, "empty rmq");
        assert!(n <= u32::MAX as usize, "rmq limited to u32 indices");
        let mut layers: Vec<Vec<u32>> = Vec::new();
        layers.push((0..n as u32).collect());
        let mut width = 1usize;
        while 2 * width <= n {
            let prev = layers.last().unwrap();
            let m = n - 2 * width + 1;
            let mut layer = Vec::with_capacity(m);
            for i in 0..m {
                let a = prev[i];
                let b = prev[i + width];
                layer.push(pick(values, a, b, take_min));
            }
            layers.push(layer);
            width *= 2;
        }
        RmqTable {
            n,
            values: values.to_vec(),
            layers,
            take_min,
        }
    }

    /// Best index in the inclusive range `[lo, hi]`.
    pub fn query(&self, lo: u32, hi: u32) -> u32 {
        debug_assert!(lo <= hi && (hi as usize) < self.n);
        let len = (hi - lo + 1) as usize;
        let k = usize::BITS as usize - 1 - len.leading_zeros() as usize;
        let width = 1usize << k;
        let a = self.layers[k][lo as usize];
        let b = self.layers[k][hi as usize + 1 - width];
        pick(&self.values, a, b, self.take_min)
    }

    pub fn value(&self, i: u32) -> f64 {
        self.values[i as usize]
    }

    /// Best value in the inclusive range `[lo, hi]`.
    pub fn query_value(&self, lo: u32, hi: u32) -> f64 {
        self.values[self.query(lo, hi) as usize]
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }
}

#[inline]
fn pick(values: &[f64], a: u32, b: u32, take_min: bool) -> u32 {
    let (va, vb) = (values[a as usize], values[b as usize]);
    let a_wins = if take_min { va <= vb } else { va >= vb };
    // <= / >= with a < b keeps the leftmost index on ties.
    if a_wins {
        a
    } else {
        b
    }
}
