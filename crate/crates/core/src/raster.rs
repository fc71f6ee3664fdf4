//! Minimal RGB raster with PPM output, line drawing and a 5×7 digit font.

pub type Rgb = [u8; 3];

pub const GLYPH_WIDTH: usize = 5;
pub const GLYPH_HEIGHT: usize = 7;

/// 5×7 bitmaps for '0'..'9'; each row uses the low five bits, MSB leftmost.
const DIGITS: [[u8; GLYPH_HEIGHT]; 10] = [
    [0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E],
    [0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E],
    [0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F],
    [0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E],
    [0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02],
    [0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E],
    [0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E],
    [0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08],
    [0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E],
    [0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C],
];

/// Whether pixel `(x, y)` of the glyph for `digit` is ink.
pub fn glyph_pixel(digit: u8, x: usize, y: usize) -> bool {
    DIGITS[digit as usize][y] >> (GLYPH_WIDTH - 1 - x) & 1 == 1
}

/// Pixel width of `text` rendered at `scale` with one blank column between glyphs.
pub fn text_width(text: &str, scale: usize) -> usize {
    let n = text.chars().count();
    if n == 0 {
        0
    } else {
        (n * (GLYPH_WIDTH + 1) - 1) * scale
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, fill: Rgb) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            data.extend_from_slice(&fill);
        }
        Self { width, height, data }
    }

    pub fn get(&self, x: usize, y: usize) -> Rgb {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn put(&mut self, x: usize, y: usize, color: Rgb) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&color);
    }

    /// Like [`put`](Self::put) but ignores coordinates outside the image.
    pub fn put_clipped(&mut self, x: i64, y: i64, color: Rgb) {
        if x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height {
            self.put(x as usize, y as usize, color);
        }
    }

    pub fn fill_rect(&mut self, x0: i64, y0: i64, w: i64, h: i64, color: Rgb) {
        for y in y0..y0 + h {
            for x in x0..x0 + w {
                self.put_clipped(x, y, color);
            }
        }
    }

    /// Bresenham line between two pixel positions, clipped to the image.
    pub fn draw_line(&mut self, (x0, y0): (i64, i64), (x1, y1): (i64, i64), color: Rgb) {
        let (mut x, mut y) = (x0, y0);
        let dx = (x1 - x0).abs();
        let dy = -(y1 - y0).abs();
        let sx = if x0 < x1 { 1 } else { -1 };
        let sy = if y0 < y1 { 1 } else { -1 };
        let mut err = dx + dy;
        loop {
            self.put_clipped(x, y, color);
            if x == x1 && y == y1 {
                break;
            }
            let e2 = 2 * err;
            if e2 >= dy {
                err += dy;
                x += sx;
            }
            if e2 <= dx {
                err += dx;
                y += sy;
            }
        }
    }

    /// Draw decimal digits with the top-left corner at `(x, y)`. Non-digit
    /// characters advance the cursor without drawing.
    pub fn draw_text(&mut self, x: i64, y: i64, text: &str, scale: usize, color: Rgb) {
        let s = scale as i64;
        for (k, ch) in text.chars().enumerate() {
            let Some(d) = ch.to_digit(10) else { continue };
            let gx = x + k as i64 * (GLYPH_WIDTH as i64 + 1) * s;
            for py in 0..GLYPH_HEIGHT {
                for px in 0..GLYPH_WIDTH {
                    if glyph_pixel(d as u8, px, py) {
                        self.fill_rect(gx + px as i64 * s, y + py as i64 * s, s, s, color);
                    }
                }
            }
        }
    }

    /// Arrow from `(x, y)` pointing along `angle` (radians in image axes).
    pub fn draw_arrow(&mut self, x: f64, y: f64, angle: f64, length: f64, color: Rgb) {
        let tip = (x + length * angle.cos(), y + length * angle.sin());
        let round = |p: (f64, f64)| (p.0.round() as i64, p.1.round() as i64);
        self.draw_line(round((x, y)), round(tip), color);
        let head = length * 0.4;
        for side in [-1.0, 1.0] {
            let a = angle + std::f64::consts::PI + side * 0.5;
            let p = (tip.0 + head * a.cos(), tip.1 + head * a.sin());
            self.draw_line(round(tip), round(p), color);
        }
    }

    /// Binary PPM (P6).
    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.data);
        out
    }

    pub fn from_ppm(bytes: &[u8]) -> Option<Self> {
        let mut fields = Vec::new();
        let mut pos = 0;
        while fields.len() < 4 {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return None;
            }
            fields.push(std::str::from_utf8(&bytes[start..pos]).ok()?);
        }
        if fields[0] != "P6" || fields[3] != "255" {
            return None;
        }
        let width: usize = fields[1].parse().ok()?;
        let height: usize = fields[2].parse().ok()?;
        let data = bytes.get(pos + 1..)?.to_vec();
        (data.len() == width * height * 3).then_some(Self { width, height, data })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ppm_roundtrip() {
        let mut img = RgbImage::new(3, 2, [1, 2, 3]);
        img.put(2, 1, [9, 8, 7]);
        let bytes = img.to_ppm();
        assert!(bytes.starts_with(b"P6\n3 2\n255\n"));
        assert_eq!(RgbImage::from_ppm(&bytes).unwrap(), img);
    }

    #[test]
    fn digits_are_distinct() {
        for a in 0..10u8 {
            for b in a + 1..10 {
                assert_ne!(DIGITS[a as usize], DIGITS[b as usize]);
            }
        }
    }

    #[test]
    fn text_renders_glyph_at_scale() {
        let mut img = RgbImage::new(20, 20, [255; 3]);
        img.draw_text(1, 1, "1", 2, [0; 3]);
        for y in 0..GLYPH_HEIGHT {
            for x in 0..GLYPH_WIDTH {
                let ink = img.get(1 + 2 * x, 1 + 2 * y) == [0; 3];
                assert_eq!(ink, glyph_pixel(1, x, y));
            }
        }
        assert_eq!(text_width("12", 2), 22);
    }

    #[test]
    fn line_endpoints_drawn_and_clipped() {
        let mut img = RgbImage::new(5, 5, [0; 3]);
        img.draw_line((-3, 2), (4, 2), [255; 3]);
        assert!((0..5).all(|x| img.get(x, 2) == [255; 3]));
    }
}
