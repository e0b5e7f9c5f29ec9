//! Binary closing with a Euclidean disk, via exact squared distance transforms.
//!
//! The structuring element is `{(dx, dy) : dx² + dy² ≤ r²}`. Dilation marks
//! pixels whose squared distance to the foreground is at most `r²`; erosion
//! keeps pixels whose squared distance to the background exceeds `r²`. The
//! work is done on a buffer padded by `r + 1`, so the result equals the
//! closing of the mask embedded in an infinite empty plane, cropped back.

use crate::raster::MaskGrid;

/// One-dimensional lower envelope of parabolas (Felzenszwalb–Huttenlocher).
fn edt_1d(f: &[f64], out: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let intersect = |p: usize, q: usize| {
        let (pf, qf) = (p as f64, q as f64);
        ((f[q] + qf * qf) - (f[p] + pf * pf)) / (2.0 * qf - 2.0 * pf)
    };
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..f.len() {
        let mut s = intersect(v[k], q);
        while s <= z[k] {
            k -= 1;
            s = intersect(v[k], q);
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        let qf = q as f64;
        while z[k + 1] < qf {
            k += 1;
        }
        let d = qf - v[k] as f64;
        *o = d * d + f[v[k]];
    }
}

/// Squared Euclidean distance from each cell to the nearest cell equal to
/// `target`. Cells with no target in reach get a value above any real
/// distance on the grid; all arithmetic stays in exactly representable integers.
fn squared_distance(cells: &[u8], width: usize, height: usize, target: u8) -> Vec<f64> {
    let far = 2.0 * ((width + height) as f64).powi(2) + 1.0;
    let mut grid: Vec<f64> = cells
        .iter()
        .map(|&c| if c == target { 0.0 } else { far })
        .collect();
    let len = width.max(height);
    let mut f = vec![0.0; len];
    let mut out = vec![0.0; len];
    let mut v = vec![0usize; len];
    let mut z = vec![0.0; len + 1];
    for x in 0..width {
        for y in 0..height {
            f[y] = grid[y * width + x];
        }
        edt_1d(&f[..height], &mut out[..height], &mut v, &mut z);
        for y in 0..height {
            grid[y * width + x] = out[y];
        }
    }
    for y in 0..height {
        let row = &mut grid[y * width..(y + 1) * width];
        f[..width].copy_from_slice(row);
        edt_1d(&f[..width], &mut out[..width], &mut v, &mut z);
        row.copy_from_slice(&out[..width]);
    }
    grid
}

fn padded(mask: &MaskGrid, pad: usize) -> (Vec<u8>, usize, usize) {
    let (w, h) = (mask.width() as usize, mask.height() as usize);
    let (pw, ph) = (w + 2 * pad, h + 2 * pad);
    let mut cells = vec![0u8; pw * ph];
    for y in 0..h {
        cells[(y + pad) * pw + pad..(y + pad) * pw + pad + w]
            .copy_from_slice(&mask.bits()[y * w..(y + 1) * w]);
    }
    (cells, pw, ph)
}

fn crop(cells: &[u8], pw: usize, pad: usize, w: u32, h: u32) -> MaskGrid {
    let (w_us, h_us) = (w as usize, h as usize);
    let mut bits = Vec::with_capacity(w_us * h_us);
    for y in 0..h_us {
        bits.extend_from_slice(&cells[(y + pad) * pw + pad..(y + pad) * pw + pad + w_us]);
    }
    MaskGrid::from_bits(w, h, bits).expect("cropped buffer has mask dimensions")
}

fn dilate_cells(cells: &[u8], pw: usize, ph: usize, r2: f64) -> Vec<u8> {
    squared_distance(cells, pw, ph, 1)
        .into_iter()
        .map(|d| (d <= r2) as u8)
        .collect()
}

fn erode_cells(cells: &[u8], pw: usize, ph: usize, r2: f64) -> Vec<u8> {
    squared_distance(cells, pw, ph, 0)
        .into_iter()
        .map(|d| (d > r2) as u8)
        .collect()
}

pub fn dilate(mask: &MaskGrid, radius: u32) -> MaskGrid {
    let pad = radius as usize + 1;
    let (cells, pw, ph) = padded(mask, pad);
    let r2 = (radius as f64).powi(2);
    crop(&dilate_cells(&cells, pw, ph, r2), pw, pad, mask.width(), mask.height())
}

/// Erosion with the region outside the grid counted as background.
pub fn erode(mask: &MaskGrid, radius: u32) -> MaskGrid {
    let pad = radius as usize + 1;
    let (cells, pw, ph) = padded(mask, pad);
    let r2 = (radius as f64).powi(2);
    crop(&erode_cells(&cells, pw, ph, r2), pw, pad, mask.width(), mask.height())
}

/// Dilation then erosion by the same disk. Extensive, idempotent, and
/// monotone in the radius.
pub fn morphological_closing(mask: &MaskGrid, radius: u32) -> MaskGrid {
    assert!(radius >= 1, "closing radius must be at least 1");
    let pad = radius as usize + 1;
    let (cells, pw, ph) = padded(mask, pad);
    let r2 = (radius as f64).powi(2);
    let dilated = dilate_cells(&cells, pw, ph, r2);
    let closed = erode_cells(&dilated, pw, ph, r2);
    crop(&closed, pw, pad, mask.width(), mask.height())
}
