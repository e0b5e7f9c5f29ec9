//! Pixel grids: binary masks, RGB stimuli, and their PNG encodings.
//!
//! Pixel `(i, j)` samples the scene at its centre `((i + 0.5) / w, (j + 0.5) / h)`,
//! row 0 at scene `y = 0`. A pixel belongs to the object iff its centre is
//! inside the polygon under the even-odd rule.

use std::io::Cursor;
use std::path::Path;

use image::codecs::png::PngEncoder;
use image::{DynamicImage, ExtendedColorType, ImageEncoder, ImageReader};

use crate::error::{Error, Result};
use crate::fsutil::atomic_write;
use crate::geometry::{Point2, Polygon};

pub const PALETTE_SIZE: usize = 24;

/// Bright object colours; channel sums are all at least 200.
pub const PALETTE: [[u8; 3]; PALETTE_SIZE] = [
    [255, 38, 38], [255, 140, 102], [230, 132, 34], [255, 217, 102],
    [255, 255, 38], [195, 230, 92], [147, 255, 38], [140, 255, 102],
    [34, 230, 34], [102, 255, 140], [38, 255, 147], [92, 230, 195],
    [38, 255, 255], [102, 217, 255], [34, 132, 230], [102, 140, 255],
    [38, 38, 255], [126, 92, 230], [147, 38, 255], [217, 102, 255],
    [230, 34, 230], [255, 102, 217], [255, 38, 147], [230, 92, 126],
];

pub const MIN_PALETTE_BRIGHTNESS: u32 = 200;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskGrid {
    width: u32,
    height: u32,
    bits: Vec<u8>,
}

impl MaskGrid {
    pub fn zeros(width: u32, height: u32) -> Self {
        assert!(width > 0 && height > 0, "mask dimensions must be positive");
        Self {
            width,
            height,
            bits: vec![0; width as usize * height as usize],
        }
    }

    /// Builds a mask from row-major 0/1 cells.
    pub fn from_bits(width: u32, height: u32, bits: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 || bits.len() != width as usize * height as usize {
            return Err(Error::Invalid(format!(
                "mask buffer of {} cells does not match {width}x{height}",
                bits.len()
            )));
        }
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::Invalid("mask cells must be 0 or 1".into()));
        }
        Ok(Self { width, height, bits })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[(y * self.width + x) as usize] != 0
    }

    pub fn set(&mut self, x: u32, y: u32, on: bool) {
        self.bits[(y * self.width + x) as usize] = on as u8;
    }

    pub fn count(&self) -> u64 {
        self.bits.iter().map(|&b| b as u64).sum()
    }

    /// True iff every foreground cell of `other` is foreground here.
    pub fn contains(&self, other: &MaskGrid) -> bool {
        self.same_shape(other) && self.bits.iter().zip(&other.bits).all(|(a, b)| a >= b)
    }

    pub fn same_shape(&self, other: &MaskGrid) -> bool {
        self.width == other.width && self.height == other.height
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageGrid {
    width: u32,
    height: u32,
    rgb: Vec<u8>,
}

impl ImageGrid {
    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn rgb(&self) -> &[u8] {
        &self.rgb
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let o = 3 * (y * self.width + x) as usize;
        [self.rgb[o], self.rgb[o + 1], self.rgb[o + 2]]
    }
}

/// Scanline rasterization at pixel centres, even-odd rule, no anti-aliasing.
pub fn rasterize_mask(poly: &Polygon, width: u32, height: u32) -> MaskGrid {
    let mut mask = MaskGrid::zeros(width, height);
    let v = poly.vertices();
    let n = v.len();
    let mut xs: Vec<f64> = Vec::with_capacity(n);
    for row in 0..height {
        let y = (row as f64 + 0.5) / height as f64;
        xs.clear();
        let mut j = n - 1;
        for i in 0..n {
            if (v[i].y > y) != (v[j].y > y) {
                xs.push(crate::geometry::edge_x_at(v[i], v[j], y));
            }
            j = i;
        }
        xs.sort_by(f64::total_cmp);
        let centre = |col: i64| (col as f64 + 0.5) / width as f64;
        for span in xs.chunks_exact(2) {
            // columns whose centre lies in [span[0], span[1])
            let mut start = ((span[0] * width as f64 - 0.5).ceil() as i64).max(0);
            while start > 0 && centre(start - 1) >= span[0] {
                start -= 1;
            }
            while start < width as i64 && centre(start) < span[0] {
                start += 1;
            }
            let mut col = start;
            while col < width as i64 && centre(col) < span[1] {
                mask.set(col as u32, row, true);
                col += 1;
            }
        }
    }
    mask
}

/// Object pixels take the palette colour, everything else is black.
pub fn render_mask(mask: &MaskGrid, color_index: usize) -> ImageGrid {
    let color = PALETTE[color_index];
    let mut rgb = Vec::with_capacity(mask.bits.len() * 3);
    for &b in &mask.bits {
        rgb.extend_from_slice(if b != 0 { &color } else { &[0, 0, 0] });
    }
    ImageGrid {
        width: mask.width,
        height: mask.height,
        rgb,
    }
}

pub fn render_image(poly: &Polygon, color_index: usize, width: u32, height: u32) -> Result<ImageGrid> {
    if color_index >= PALETTE_SIZE {
        return Err(Error::Invalid(format!(
            "color index {color_index} outside 0..{PALETTE_SIZE}"
        )));
    }
    Ok(render_mask(&rasterize_mask(poly, width, height), color_index))
}

/// Per-pixel point-in-polygon reference, used to cross-check the scanline path.
pub fn rasterize_mask_naive(poly: &Polygon, width: u32, height: u32) -> MaskGrid {
    let mut mask = MaskGrid::zeros(width, height);
    for row in 0..height {
        for col in 0..width {
            let p = Point2::new(
                (col as f64 + 0.5) / width as f64,
                (row as f64 + 0.5) / height as f64,
            );
            mask.set(col, row, poly.contains(p));
        }
    }
    mask
}

pub(crate) fn encode_png(
    width: u32,
    height: u32,
    data: &[u8],
    color: ExtendedColorType,
) -> std::result::Result<Vec<u8>, String> {
    let mut buf = Vec::new();
    PngEncoder::new(&mut buf)
        .write_image(data, width, height, color)
        .map_err(|e| e.to_string())?;
    Ok(buf)
}

pub fn encode_mask_png(mask: &MaskGrid) -> Vec<u8> {
    let data: Vec<u8> = mask.bits.iter().map(|&b| b * 255).collect();
    encode_png(mask.width, mask.height, &data, ExtendedColorType::L8)
        .expect("in-memory PNG encoding of a valid mask")
}

pub fn write_mask(path: &Path, mask: &MaskGrid) -> Result<()> {
    atomic_write(path, &encode_mask_png(mask))
}

pub(crate) fn decode(path: &Path) -> Result<DynamicImage> {
    let reader = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    reader.decode().map_err(|e| Error::Image {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Converts 8-bit gray samples in {0, 255} into a mask.
pub(crate) fn mask_from_gray8(path: &Path, width: u32, height: u32, data: &[u8]) -> Result<MaskGrid> {
    let mut bits = Vec::with_capacity(data.len());
    for (i, &v) in data.iter().enumerate() {
        match v {
            0 => bits.push(0),
            255 => bits.push(1),
            other => {
                return Err(Error::MalformedMask {
                    path: path.to_path_buf(),
                    reason: format!(
                        "pixel ({}, {}) has value {other}, expected 0 or 255",
                        i as u32 % width,
                        i as u32 / width
                    ),
                })
            }
        }
    }
    Ok(MaskGrid { width, height, bits })
}

/// Reads an 8-bit single-channel PNG (or PGM) with values {0, 255}.
pub fn read_mask(path: &Path) -> Result<MaskGrid> {
    match decode(path)? {
        DynamicImage::ImageLuma8(img) => {
            let (w, h) = img.dimensions();
            mask_from_gray8(path, w, h, img.as_raw())
        }
        other => Err(Error::MalformedMask {
            path: path.to_path_buf(),
            reason: format!("expected 8-bit single-channel image, found {:?}", other.color()),
        }),
    }
}

pub fn encode_image_png(img: &ImageGrid) -> Vec<u8> {
    encode_png(img.width, img.height, &img.rgb, ExtendedColorType::Rgb8)
        .expect("in-memory PNG encoding of a valid image")
}

pub fn write_image(path: &Path, img: &ImageGrid) -> Result<()> {
    atomic_write(path, &encode_image_png(img))
}

pub fn read_image(path: &Path) -> Result<ImageGrid> {
    match decode(path)? {
        DynamicImage::ImageRgb8(img) => {
            let (width, height) = img.dimensions();
            Ok(ImageGrid {
                width,
                height,
                rgb: img.into_raw(),
            })
        }
        other => Err(Error::Image {
            path: path.to_path_buf(),
            message: format!("expected 8-bit RGB image, found {:?}", other.color()),
        }),
    }
}

/// Decodes PNG bytes already in memory; used where files are compared by content.
pub fn decode_mask_bytes(bytes: &[u8]) -> Result<MaskGrid> {
    let img = ImageReader::new(Cursor::new(bytes))
        .with_guessed_format()
        .map_err(|e| Error::io("<memory>", e))?
        .decode()
        .map_err(|e| Error::Image {
            path: "<memory>".into(),
            message: e.to_string(),
        })?;
    let gray = img.to_luma8();
    let (w, h) = gray.dimensions();
    mask_from_gray8(Path::new("<memory>"), w, h, gray.as_raw())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{generate_polygon, GenParams};
    use std::collections::HashSet;

    fn poly(v: &[(f64, f64)]) -> Polygon {
        Polygon::new(v.iter().map(|&(x, y)| Point2::new(x, y)).collect()).unwrap()
    }

    fn gen(seed: u64) -> Polygon {
        generate_polygon(&GenParams {
            n_vertices: 9,
            n_concavities: 2,
            irregularity: 0.5,
            spikiness: 0.4,
            seed,
        })
        .unwrap()
    }

    #[test]
    fn palette_is_distinct_and_bright() {
        let set: HashSet<_> = PALETTE.iter().collect();
        assert_eq!(set.len(), PALETTE_SIZE);
        for c in PALETTE {
            assert!(c.iter().map(|&v| v as u32).sum::<u32>() >= MIN_PALETTE_BRIGHTNESS);
        }
    }

    #[test]
    fn unit_square_fills_grid() {
        let sq = poly(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]);
        assert_eq!(rasterize_mask(&sq, 100, 100).count(), 10_000);
    }

    #[test]
    fn triangle_matches_naive_oracle() {
        let tri = poly(&[(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]);
        let fast = rasterize_mask(&tri, 100, 100);
        let naive = rasterize_mask_naive(&tri, 100, 100);
        assert_eq!(fast, naive);
        assert!((fast.count() as i64 - 5000).abs() <= 100, "{}", fast.count());
    }

    #[test]
    fn generated_polygon_matches_naive_oracle() {
        for seed in 0..20 {
            let p = gen(seed);
            assert_eq!(rasterize_mask(&p, 97, 131), rasterize_mask_naive(&p, 97, 131));
        }
    }

    #[test]
    fn image_and_mask_align() {
        let p = gen(3);
        let mask = rasterize_mask(&p, 512, 512);
        let img = render_image(&p, 5, 512, 512).unwrap();
        let mut object = 0;
        for y in 0..512 {
            for x in 0..512 {
                let px = img.pixel(x, y);
                if mask.get(x, y) {
                    assert_eq!(px, PALETTE[5]);
                    object += 1;
                } else {
                    assert_eq!(px, [0, 0, 0]);
                }
            }
        }
        assert_eq!(object, mask.count());
    }

    #[test]
    fn square_image_has_two_colours() {
        let sq = poly(&[(0.2, 0.2), (0.8, 0.2), (0.8, 0.8), (0.2, 0.8)]);
        let img = render_image(&sq, 0, 64, 64).unwrap();
        let colours: HashSet<[u8; 3]> = img.rgb().chunks(3).map(|c| [c[0], c[1], c[2]]).collect();
        assert_eq!(colours.len(), 2);
        assert!(render_image(&sq, 24, 64, 64).is_err());
    }

    #[test]
    fn mask_png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.png");
        let mask = rasterize_mask(&gen(8), 512, 512);
        write_mask(&path, &mask).unwrap();
        let back = read_mask(&path).unwrap();
        assert_eq!(back, mask);
        assert_eq!((back.width(), back.height()), (512, 512));
    }

    #[test]
    fn mask_with_gray_value_is_malformed() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.png");
        let mut data = vec![0u8; 16];
        data[5] = 128;
        std::fs::write(&path, encode_png(4, 4, &data, ExtendedColorType::L8).unwrap()).unwrap();
        assert!(matches!(read_mask(&path), Err(Error::MalformedMask { .. })));
    }

    #[test]
    fn pgm_masks_are_accepted() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.pgm");
        let mut bytes = b"P5\n3 2\n255\n".to_vec();
        bytes.extend_from_slice(&[0, 255, 0, 255, 255, 0]);
        std::fs::write(&path, bytes).unwrap();
        let m = read_mask(&path).unwrap();
        assert_eq!(m.bits(), &[0, 1, 0, 1, 1, 0]);
    }

    #[test]
    fn image_round_trip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("i.png");
        let img = render_image(&gen(2), 17, 128, 128).unwrap();
        write_image(&path, &img).unwrap();
        let back = read_image(&path).unwrap();
        assert_eq!(back, img);
        let colours: HashSet<[u8; 3]> = back.rgb().chunks(3).map(|c| [c[0], c[1], c[2]]).collect();
        assert!(colours.iter().filter(|c| **c != [0, 0, 0]).all(|c| PALETTE.contains(c)));

        assert!(matches!(
            read_image(&dir.path().join("missing.png")),
            Err(Error::Io { .. })
        ));
        let bytes = std::fs::read(&path).unwrap();
        let truncated = dir.path().join("t.png");
        std::fs::write(&truncated, &bytes[..bytes.len() / 2]).unwrap();
        assert!(read_image(&truncated).is_err());
    }
}
