use std::fs;
use std::io::{BufWriter, Cursor};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::kernels::resample;

/// Single-channel image with pixels in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageRecord {
    pub id: String,
    pub path: PathBuf,
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f32>,
}

impl ImageRecord {
    pub fn new(id: impl Into<String>, width: usize, height: usize, pixels: Vec<f32>) -> Self {
        assert_eq!(
            width * height,
            pixels.len(),
            "pixel buffer does not match extents"
        );
        Self {
            id: id.into(),
            path: PathBuf::new(),
            width,
            height,
            pixels,
        }
    }
}

const PNG_SIGNATURE: [u8; 8] = [0x89, b'P', b'N', b'G', b'\r', b'\n', 0x1a, b'\n'];

/// Reads an 8-bit grayscale PGM (P5) or PNG file.
pub fn decode_image(path: &Path) -> Result<ImageRecord> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (width, height, raw) = if bytes.starts_with(b"P5") {
        decode_pgm(&bytes)?
    } else if bytes.starts_with(&PNG_SIGNATURE) {
        decode_png(&bytes)?
    } else {
        return Err(Error::Format(format!(
            "{}: neither PGM (P5) nor PNG",
            path.display()
        )));
    };
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(ImageRecord {
        id,
        path: path.to_path_buf(),
        width,
        height,
        pixels: raw.into_iter().map(|b| b as f32 / 255.0).collect(),
    })
}

fn decode_pgm(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>)> {
    let mut pos = 2;
    let mut header = [0usize; 3];
    for field in &mut header {
        // whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(_) => break,
                None => return Err(Error::Decode("PGM header truncated".into())),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        let text = std::str::from_utf8(&bytes[start..pos]).unwrap_or_default();
        *field = text
            .parse()
            .map_err(|_| Error::Decode(format!("bad PGM header field {text:?}")))?;
    }
    let [width, height, maxval] = header;
    if maxval != 255 {
        return Err(Error::Format(format!(
            "PGM maxval {maxval} unsupported (8-bit only)"
        )));
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(Error::Decode("PGM header not terminated".into()));
    }
    pos += 1;
    let n = width * height;
    let data = bytes
        .get(pos..pos + n)
        .ok_or_else(|| Error::Decode(format!("PGM payload truncated: need {n} bytes")))?;
    Ok((width, height, data.to_vec()))
}

fn decode_png(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>)> {
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::IDENTITY);
    let mut reader = decoder
        .read_info()
        .map_err(|e| Error::Decode(format!("PNG header: {e}")))?;
    let info = reader.info();
    if info.color_type != png::ColorType::Grayscale || info.bit_depth != png::BitDepth::Eight {
        return Err(Error::Format(format!(
            "PNG must be 8-bit grayscale, got {:?} at {:?}",
            info.color_type, info.bit_depth
        )));
    }
    let mut buf = vec![0; reader.output_buffer_size()];
    let frame = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::Decode(format!("PNG data: {e}")))?;
    buf.truncate(frame.buffer_size());
    Ok((frame.width as usize, frame.height as usize, buf))
}

fn quantize(v: f32) -> u8 {
    // f32::round rounds half away from zero
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Writes `rec` as PGM (`.pgm`) or PNG (any other extension).
pub fn encode_image(rec: &ImageRecord, path: &Path) -> Result<()> {
    let raw: Vec<u8> = rec.pixels.iter().map(|&v| quantize(v)).collect();
    let is_pgm = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("pgm"));
    let mut out = Vec::with_capacity(raw.len() + 64);
    if is_pgm {
        out.extend_from_slice(format!("P5\n{} {}\n255\n", rec.width, rec.height).as_bytes());
        out.extend_from_slice(&raw);
    } else {
        let mut encoder = png::Encoder::new(
            BufWriter::new(&mut out),
            rec.width as u32,
            rec.height as u32,
        );
        encoder.set_color(png::ColorType::Grayscale);
        encoder.set_depth(png::BitDepth::Eight);
        let mut writer = encoder
            .write_header()
            .map_err(|e| Error::Format(format!("PNG encode: {e}")))?;
        writer
            .write_image_data(&raw)
            .map_err(|e| Error::Format(format!("PNG encode: {e}")))?;
        writer
            .finish()
            .map_err(|e| Error::Format(format!("PNG encode: {e}")))?;
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Square `to x to` resample with the network's bilinear rule, clamped to `[0, 1]`.
pub fn resize_bilinear(rec: &ImageRecord, to: usize) -> Result<ImageRecord> {
    if to == 0 {
        return Err(Error::Domain("resize target must be at least 1".into()));
    }
    let pixels = resample::resize_forward(&rec.pixels, 1, rec.height, rec.width, to, to)
        .into_iter()
        .map(|v| v.clamp(0.0, 1.0))
        .collect();
    Ok(ImageRecord {
        id: rec.id.clone(),
        path: rec.path.clone(),
        width: to,
        height: to,
        pixels,
    })
}
