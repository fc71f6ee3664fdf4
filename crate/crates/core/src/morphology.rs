//! Binary morphology with square structuring elements.
//!
//! Square kernels are separable, so each pass runs a row sweep followed by a
//! column sweep using running counts. Pixels outside the mask read as
//! background: erosion eats in from the border and dilation is clipped.

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryMask {
    pub width: usize,
    pub height: usize,
    pub data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height, data: vec![false; width * height] }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut m = Self::new(width, height);
        for y in 0..height {
            for x in 0..width {
                m.data[y * width + x] = f(x, y);
            }
        }
        m
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.data[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.data.iter().any(|&b| b)
    }

    /// Every set pixel of `self` is set in `other` (same dimensions).
    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.data.iter().zip(&other.data).all(|(&a, &b)| !a || b)
    }

    pub fn iter_set(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| (i % self.width, i / self.width))
    }
}

/// Dilation by a `kernel`×`kernel` square (odd size), repeated `iterations` times.
pub fn dilate(mask: &BinaryMask, kernel: usize, iterations: usize) -> BinaryMask {
    apply(mask, kernel, iterations, true)
}

/// Erosion by a `kernel`×`kernel` square (odd size), repeated `iterations` times.
pub fn erode(mask: &BinaryMask, kernel: usize, iterations: usize) -> BinaryMask {
    apply(mask, kernel, iterations, false)
}

fn apply(mask: &BinaryMask, kernel: usize, iterations: usize, dilation: bool) -> BinaryMask {
    assert!(kernel % 2 == 1, "kernel size must be odd");
    let r = kernel / 2;
    let mut cur = mask.clone();
    for _ in 0..iterations {
        let rows = sweep(&cur.data, cur.width, cur.height, r, dilation, true);
        let data = sweep(&rows, cur.width, cur.height, r, dilation, false);
        cur.data = data;
    }
    cur
}

/// One-dimensional window pass along rows (`horizontal`) or columns.
fn sweep(src: &[bool], w: usize, h: usize, r: usize, dilation: bool, horizontal: bool) -> Vec<bool> {
    let mut out = vec![false; w * h];
    let (lines, len) = if horizontal { (h, w) } else { (w, h) };
    let at = |line: usize, i: usize| if horizontal { line * w + i } else { i * w + line };
    let mut prefix = vec![0usize; len + 1];
    for line in 0..lines {
        for i in 0..len {
            prefix[i + 1] = prefix[i] + src[at(line, i)] as usize;
        }
        for i in 0..len {
            let lo = i.saturating_sub(r);
            let hi = (i + r).min(len - 1);
            let set = prefix[hi + 1] - prefix[lo];
            out[at(line, i)] = if dilation {
                set > 0
            } else {
                // Out-of-bounds window positions count as background.
                i >= r && i + r < len && set == 2 * r + 1
            };
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solid_square_erodes_to_interior() {
        let m = BinaryMask::from_fn(10, 10, |_, _| true);
        let e = erode(&m, 3, 1);
        assert_eq!(e.count(), 64);
        assert!(e.get(1, 1) && e.get(8, 8) && !e.get(0, 5) && !e.get(9, 5));
    }

    #[test]
    fn single_pixel_dilates_to_13_square() {
        let mut m = BinaryMask::new(31, 31);
        m.set(15, 15, true);
        let d = dilate(&m, 5, 3);
        assert_eq!(d.count(), 169);
        assert!(d.get(9, 9) && d.get(21, 21) && !d.get(8, 15) && !d.get(15, 22));
    }

    #[test]
    fn dilation_clips_at_corner() {
        let mut m = BinaryMask::new(20, 20);
        m.set(0, 0, true);
        assert_eq!(dilate(&m, 5, 3).count(), 49);
    }

    #[test]
    fn zero_iterations_is_identity() {
        let m = BinaryMask::from_fn(7, 5, |x, y| (x + y) % 3 == 0);
        assert_eq!(dilate(&m, 5, 0), m);
        assert_eq!(erode(&m, 3, 0), m);
    }
}
