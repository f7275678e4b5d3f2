//! Static PNG output: partition image, orbit scatter and a `d_ρ` bar chart.

use std::io::Cursor;

use image::{ImageFormat, Rgb, RgbImage};

use abc_circular::analytic::{sample_points, AnalyticError, AnalyticMap};
use abc_circular::par;
use abc_circular::params::StageParams;
use abc_circular::tabulated::TabulatedMap;
use abc_circular::transect::brute_inverse;

const PALETTE: [[u8; 3]; 8] = [
    [31, 119, 180],
    [255, 127, 14],
    [44, 160, 44],
    [214, 39, 40],
    [148, 103, 189],
    [140, 86, 75],
    [227, 119, 194],
    [23, 190, 207],
];

fn shade(c: [u8; 3], t: f64) -> Rgb<u8> {
    let f = 0.45 + 0.55 * t;
    Rgb(c.map(|v| (v as f64 * f).round() as u8))
}

fn pq(params: &StageParams) -> Result<(u64, u64), AnalyticError> {
    Ok((params.p_u64()?, params.q_u64()?))
}

/// Each pixel `x` is coloured by the `ξ_n` atom containing `H_n^{-1}(x)`:
/// hue by tower, brightness by level. Images use tabulated evaluation.
pub fn partition_image(conj: &AnalyticMap, params: &StageParams, size: usize) -> Result<RgbImage, AnalyticError> {
    let (p, q) = pq(params)?;
    let inv = brute_inverse(p % q, q).unwrap_or(0);
    let s = params.s as usize;
    let back = TabulatedMap::new(&conj.inverse());
    let px = par::map_range(size * size, |i| {
        let (col, row) = (i % size, i / size);
        let x = [(col as f64 + 0.5) / size as f64, 1.0 - (row as f64 + 0.5) / size as f64];
        let [y1, y2] = back.apply(x);
        let c = ((y1.rem_euclid(1.0) * q as f64) as u64).min(q - 1);
        let tower = ((y2.rem_euclid(1.0) * s as f64) as usize).min(s - 1);
        let level = (c as u128 * inv as u128 % q as u128) as f64;
        shade(PALETTE[tower % PALETTE.len()], level / q.max(2) as f64)
    });
    Ok(RgbImage::from_fn(size as u32, size as u32, |x, y| px[y as usize * size + x as usize]))
}

/// Orbit points `H_n(R^{t α_n} y)` for a few start points `y`.
pub fn orbit_scatter(conj: &AnalyticMap, params: &StageParams, size: usize) -> Result<RgbImage, AnalyticError> {
    const STARTS: usize = 6;
    const POINTS: u64 = 2_000;
    let (p, q) = pq(params)?;
    let steps = q.min(POINTS / STARTS as u64);
    let starts = sample_points(STARTS, 0);
    let fast = TabulatedMap::new(conj);
    let jobs: Vec<(usize, u64)> = (0..STARTS).flat_map(|a| (0..steps).map(move |t| (a, t))).collect();
    let pts = par::map(&jobs, |&(a, t)| {
        let shift = (t as u128 * p as u128 % q as u128) as f64 / q as f64;
        let [y1, y2] = starts[a];
        (a, fast.apply([(y1 + shift).rem_euclid(1.0), y2]))
    });
    let mut img = RgbImage::from_pixel(size as u32, size as u32, Rgb([255, 255, 255]));
    for (a, [x1, x2]) in pts {
        let cx = (x1.rem_euclid(1.0) * size as f64) as i64;
        let cy = ((1.0 - x2.rem_euclid(1.0)) * size as f64) as i64;
        for (dx, dy) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
            let (u, v) = (cx + dx, cy + dy);
            if (0..size as i64).contains(&u) && (0..size as i64).contains(&v) {
                img.put_pixel(u as u32, v as u32, Rgb(PALETTE[a % PALETTE.len()]));
            }
        }
    }
    Ok(img)
}

/// One bar per stage on a log scale from `1e-16` to `1e4`; overflowed gaps
/// fill the column in red. The blue tick marks the stage's target.
pub fn gap_chart(gaps: &[(Option<f64>, f64)], size: usize) -> RgbImage {
    let (lo, hi) = (-16.0, 4.0);
    let h = size as f64;
    let height = |v: f64| ((v.max(1e-300).log10() - lo) / (hi - lo)).clamp(0.0, 1.0) * (h - 2.0);
    let bar = (size / (2 * gaps.len().max(1) + 1)).max(1);
    let mut img = RgbImage::from_pixel(size as u32, size as u32, Rgb([255, 255, 255]));
    for (i, &(value, target)) in gaps.iter().enumerate() {
        let x0 = bar * (2 * i + 1);
        let (top, colour) = match value {
            Some(v) => (height(v), Rgb([31, 119, 180])),
            None => (h - 2.0, Rgb([214, 39, 40])),
        };
        let tick = (h - 1.0 - height(target)) as u32;
        for x in x0..(x0 + bar).min(size) {
            for y in (h - 1.0 - top) as u32..size as u32 {
                img.put_pixel(x as u32, y, colour);
            }
            img.put_pixel(x as u32, tick, Rgb([0, 0, 160]));
        }
    }
    for x in 0..size as u32 {
        img.put_pixel(x, size as u32 - 1, Rgb([0, 0, 0]));
    }
    img
}

pub fn png_bytes(img: &RgbImage) -> Result<Vec<u8>, String> {
    let mut buf = Cursor::new(Vec::new());
    img.write_to(&mut buf, ImageFormat::Png).map_err(|e| e.to_string())?;
    Ok(buf.into_inner())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_partition_is_banded() {
        let params = StageParams::initial(2).unwrap();
        let img = partition_image(&AnalyticMap::identity(), &params, 8).unwrap();
        assert_eq!(img.get_pixel(0, 7), img.get_pixel(7, 4));
        assert_ne!(img.get_pixel(0, 0), img.get_pixel(0, 7));
    }

    #[test]
    fn overflow_bars_fill_the_column() {
        let img = gap_chart(&[(None, 0.05), (Some(1e-3), 0.025)], 50);
        assert_eq!(*img.get_pixel(11, 2), Rgb([214, 39, 40]));
        assert_eq!(*img.get_pixel(31, 2), Rgb([255, 255, 255]));
        assert!(png_bytes(&img).unwrap().starts_with(&[0x89, b'P', b'N', b'G']));
    }
}
