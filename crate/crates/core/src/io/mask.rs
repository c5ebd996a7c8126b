use super::{parse_error, IoError};
use crate::fit::SilhouetteMask;

/// Gray values at or above this are foreground.
pub const FOREGROUND_THRESHOLD: u8 = 128;

struct Header {
    magic: [u8; 2],
    width: usize,
    height: usize,
    data: usize,
}

fn skip_space(b: &[u8], mut i: usize) -> usize {
    loop {
        while i < b.len() && b[i].is_ascii_whitespace() {
            i += 1;
        }
        if i < b.len() && b[i] == b'#' {
            while i < b.len() && b[i] != b'\n' {
                i += 1;
            }
        } else {
            return i;
        }
    }
}

fn number(b: &[u8], i: usize, what: &str) -> Result<(usize, usize), IoError> {
    let start = skip_space(b, i);
    let mut end = start;
    while end < b.len() && b[end].is_ascii_digit() {
        end += 1;
    }
    if end == start {
        return Err(parse_error(0, start, format!("expected {what}")));
    }
    let v = std::str::from_utf8(&b[start..end])
        .unwrap()
        .parse()
        .map_err(|_| parse_error(0, start, format!("{what} out of range")))?;
    Ok((v, end))
}

fn header(b: &[u8]) -> Result<Header, IoError> {
    if b.len() < 2 || b[0] != b'P' || !(b[1] == b'4' || b[1] == b'5') {
        return Err(parse_error(0, 0, "expected P4 (PBM) or P5 (PGM) magic"));
    }
    let (width, i) = number(b, 2, "width")?;
    let (height, mut i) = number(b, i, "height")?;
    if b[1] == b'5' {
        let (m, j) = number(b, i, "maxval")?;
        if !(1..=255).contains(&m) {
            return Err(parse_error(0, j, format!("maxval {m} (only 8-bit images are read)")));
        }
        i = j;
    }
    if width == 0 || height == 0 {
        return Err(parse_error(0, i, "empty image"));
    }
    if i >= b.len() || !b[i].is_ascii_whitespace() {
        return Err(parse_error(0, i, "expected one whitespace byte before the raster"));
    }
    Ok(Header {
        magic: [b[0], b[1]],
        width,
        height,
        data: i + 1,
    })
}

/// Binary PGM (P5, 8-bit) or PBM (P4). PGM pixels with value ≥ 128 and
/// PBM bits set to 1 are foreground.
pub fn read_mask(bytes: &[u8]) -> Result<SilhouetteMask, IoError> {
    let h = header(bytes)?;
    let raster = &bytes[h.data..];
    let row_bytes = if h.magic[1] == b'5' {
        h.width
    } else {
        h.width.div_ceil(8)
    };
    let need = row_bytes
        .checked_mul(h.height)
        .ok_or_else(|| parse_error(0, h.data, "image too large"))?;
    if raster.len() < need {
        return Err(parse_error(
            0,
            bytes.len(),
            format!("raster has {} of {need} bytes", raster.len()),
        ));
    }
    if raster.len() > need {
        return Err(parse_error(0, h.data + need, "trailing bytes after the raster"));
    }
    let mask = if h.magic[1] == b'5' {
        SilhouetteMask::from_fn(h.width, h.height, |x, y| {
            raster[y * row_bytes + x] >= FOREGROUND_THRESHOLD
        })
    } else {
        SilhouetteMask::from_fn(h.width, h.height, |x, y| {
            raster[y * row_bytes + x / 8] >> (7 - x % 8) & 1 == 1
        })
    };
    Ok(mask)
}

/// P5 with foreground 255 and background 0.
pub fn write_pgm(mask: &SilhouetteMask) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", mask.width, mask.height).into_bytes();
    for y in 0..mask.height {
        for x in 0..mask.width {
            out.push(if mask.get(x, y) { 255 } else { 0 });
        }
    }
    out
}

/// P4 with foreground bits set.
pub fn write_pbm(mask: &SilhouetteMask) -> Vec<u8> {
    let mut out = format!("P4\n{} {}\n", mask.width, mask.height).into_bytes();
    let row_bytes = mask.width.div_ceil(8);
    for y in 0..mask.height {
        let mut row = vec![0u8; row_bytes];
        for x in 0..mask.width {
            if mask.get(x, y) {
                row[x / 8] |= 0x80 >> (x % 8);
            }
        }
        out.extend_from_slice(&row);
    }
    out
}
