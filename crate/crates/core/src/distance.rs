//! Exact squared Euclidean distance transform with nearest-site tracking.
//!
//! Two separable passes: a per-column scan for the nearest set pixel in the
//! same column, then a per-row lower envelope of parabolas. Envelope
//! breakpoints are compared as exact rationals so ties resolve
//! deterministically: among equidistant sites the one with the smallest
//! column wins, then the smallest row.

use crate::mask::BitMask;

/// Marker for "no site" in [`Transform::site`].
pub const NO_SITE: usize = usize::MAX;

/// Per-pixel squared distance (in pixel units) to the nearest set pixel.
#[derive(Debug, Clone)]
pub struct Transform {
    pub width: usize,
    pub height: usize,
    /// `u64::MAX` when the source mask is empty.
    pub dist2: Vec<u64>,
    /// Row-major index of the nearest site, or [`NO_SITE`].
    pub site: Vec<usize>,
}

impl Transform {
    #[inline]
    pub fn dist2_at(&self, row: usize, col: usize) -> u64 {
        self.dist2[row * self.width + col]
    }

    /// `(row, col)` of the site nearest to `(row, col)`.
    pub fn site_at(&self, row: usize, col: usize) -> Option<(usize, usize)> {
        match self.site[row * self.width + col] {
            NO_SITE => None,
            i => Some((i / self.width, i % self.width)),
        }
    }
}

/// Exact rational `num / den` with `den > 0`.
#[derive(Clone, Copy)]
struct Breakpoint {
    num: i128,
    den: i128,
}

impl Breakpoint {
    const NEG_INF: Breakpoint = Breakpoint { num: -1, den: 0 };

    fn le(self, other: Breakpoint) -> bool {
        if self.den == 0 {
            return true;
        }
        if other.den == 0 {
            return false;
        }
        self.num * other.den <= other.num * self.den
    }

    fn lt_int(self, x: i128) -> bool {
        self.den == 0 || self.num < x * self.den
    }
}

pub fn euclidean_transform(mask: &BitMask) -> Transform {
    let (w, h) = mask.dims();
    const INF: u64 = u64::MAX;

    // Pass 1: nearest set row in each column; ties go to the row above.
    let mut col_d2 = vec![INF; w * h];
    let mut col_row = vec![NO_SITE; w * h];
    for c in 0..w {
        let mut above: Option<usize> = None;
        for r in 0..h {
            if mask.get(r, c) {
                above = Some(r);
            }
            if let Some(a) = above {
                let d = (r - a) as u64;
                col_d2[r * w + c] = d * d;
                col_row[r * w + c] = a;
            }
        }
        let mut below: Option<usize> = None;
        for r in (0..h).rev() {
            if mask.get(r, c) {
                below = Some(r);
            }
            if let Some(b) = below {
                let d = (b - r) as u64;
                if d * d < col_d2[r * w + c] {
                    col_d2[r * w + c] = d * d;
                    col_row[r * w + c] = b;
                }
            }
        }
    }

    // Pass 2: lower envelope of parabolas along each row.
    let mut dist2 = vec![INF; w * h];
    let mut site = vec![NO_SITE; w * h];
    let mut v: Vec<usize> = Vec::with_capacity(w);
    let mut z: Vec<Breakpoint> = Vec::with_capacity(w);
    for r in 0..h {
        let f = &col_d2[r * w..(r + 1) * w];
        v.clear();
        z.clear();
        for q in 0..w {
            if f[q] == INF {
                continue;
            }
            loop {
                let Some(&p) = v.last() else {
                    v.push(q);
                    z.push(Breakpoint::NEG_INF);
                    break;
                };
                let (qi, pi) = (q as i128, p as i128);
                let s = Breakpoint {
                    num: (f[q] as i128 + qi * qi) - (f[p] as i128 + pi * pi),
                    den: 2 * (qi - pi),
                };
                if s.le(*z.last().expect("z tracks v")) {
                    v.pop();
                    z.pop();
                } else {
                    v.push(q);
                    z.push(s);
                    break;
                }
            }
        }
        if v.is_empty() {
            continue;
        }
        let mut k = 0;
        for x in 0..w {
            while k + 1 < v.len() && z[k + 1].lt_int(x as i128) {
                k += 1;
            }
            let q = v[k];
            let dx = x.abs_diff(q) as u64;
            dist2[r * w + x] = dx * dx + f[q];
            site[r * w + x] = col_row[r * w + q] * w + q;
        }
    }

    Transform {
        width: w,
        height: h,
        dist2,
        site,
    }
}
