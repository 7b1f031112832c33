//! Brute-force segment against box test: walks the segment in small steps.

#![allow(dead_code)]

/// True if any of `steps + 1` evenly spaced points of `a..b` lies inside the box.
pub fn sampled_hit(a: [f64; 3], b: [f64; 3], min: [f64; 3], max: [f64; 3], steps: usize) -> bool {
    (0..=steps).any(|i| {
        let t = i as f64 / steps as f64;
        (0..3).all(|k| {
            let p = a[k] + t * (b[k] - a[k]);
            p >= min[k] && p <= max[k]
        })
    })
}
