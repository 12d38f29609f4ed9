//! A minimal 2D Sobol sequence.
//!
//! Gray-code construction with 32-bit direction integers. Dimension 0 is the
//! van der Corput sequence in base 2; dimension 1 uses the primitive
//! polynomial `x + 1` (direction integers 1, 3, 5, 15, 17, 51, ...), the
//! standard second Sobol dimension. The point set for a power-of-two count is
//! identical to the natural-order sequence, and the output is bit-exact
//! across platforms.

const BITS: u32 = 32;

fn direction_integers_dim2() -> [u32; BITS as usize] {
    let mut m = [0u32; BITS as usize];
    m[0] = 1;
    for k in 1..BITS as usize {
        m[k] = (m[k - 1] << 1) ^ m[k - 1];
    }
    let mut v = [0u32; BITS as usize];
    for (k, vk) in v.iter_mut().enumerate() {
        *vk = m[k] << (BITS - 1 - k as u32);
    }
    v
}

/// The first `2^m` points of the 2D Sobol sequence, in `[0, 1)^2`.
pub fn sobol_2d(m: u32) -> Vec<(f64, f64)> {
    assert!(m <= 30, "sobol_2d: m={m} too large");
    let n = 1usize << m;
    let v2 = direction_integers_dim2();
    let scale = 1.0 / (1u64 << BITS) as f64;

    let mut points = Vec::with_capacity(n);
    let (mut x1, mut x2) = (0u32, 0u32);
    points.push((0.0, 0.0));
    for i in 1..n as u64 {
        let c = i.trailing_zeros() as usize;
        x1 ^= 1u32 << (BITS - 1 - c as u32); // dim-1 direction integers
        x2 ^= v2[c];
        points.push((x1 as f64 * scale, x2 as f64 * scale));
    }
    points
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dim2_direction_integers_match_reference() {
        let mut m = [0u32; BITS as usize];
        m[0] = 1;
        for k in 1..8 {
            m[k] = (m[k - 1] << 1) ^ m[k - 1];
        }
        assert_eq!(&m[..8], &[1, 3, 5, 15, 17, 51, 85, 255]);
    }

    #[test]
    fn first_points_are_the_classic_sequence() {
        let pts = sobol_2d(3);
        let expect = [
            (0.0, 0.0),
            (0.5, 0.5),
            (0.75, 0.25),
            (0.25, 0.75),
            (0.375, 0.375),
            (0.875, 0.875),
            (0.625, 0.125),
            (0.125, 0.625),
        ];
        for (p, e) in pts.iter().zip(expect.iter()) {
            assert!((p.0 - e.0).abs() < 1e-15 && (p.1 - e.1).abs() < 1e-15);
        }
    }

    #[test]
    fn balance_each_dyadic_box_holds_one_point() {
        // 2^m points: every dyadic interval of length 2^-m in each coordinate
        // holds exactly one point (1D projection balance of Sobol).
        let m = 8;
        let pts = sobol_2d(m);
        for dim in 0..2 {
            let mut seen = vec![false; 1 << m];
            for p in &pts {
                let u = if dim == 0 { p.0 } else { p.1 };
                let cell = (u * (1u64 << m) as f64) as usize;
                assert!(!seen[cell], "duplicate cell in dim {dim}");
                seen[cell] = true;
            }
        }
    }

    #[test]
    fn deterministic_across_calls() {
        assert_eq!(sobol_2d(10), sobol_2d(10));
    }
}
