//! Reader and writer for the GeoTIFF subset used by raster stacks.
//!
//! Supported: classic little-endian TIFF, first IFD only, striped or tiled
//! layout, chunky or planar samples, no compression or Deflate (no
//! predictor), samples of uint8, uint16 or float32. Georeferencing comes from
//! `ModelPixelScale` and `ModelTiepoint`; the GDAL nodata ASCII tag is
//! honoured.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::mask::BitMask;
use crate::raster::{Geotransform, RasterStack};

const TAG_IMAGE_WIDTH: u16 = 256;
const TAG_IMAGE_LENGTH: u16 = 257;
const TAG_BITS_PER_SAMPLE: u16 = 258;
const TAG_COMPRESSION: u16 = 259;
const TAG_PHOTOMETRIC: u16 = 262;
const TAG_STRIP_OFFSETS: u16 = 273;
const TAG_SAMPLES_PER_PIXEL: u16 = 277;
const TAG_ROWS_PER_STRIP: u16 = 278;
const TAG_STRIP_BYTE_COUNTS: u16 = 279;
const TAG_PLANAR_CONFIG: u16 = 284;
const TAG_PREDICTOR: u16 = 317;
const TAG_TILE_WIDTH: u16 = 322;
const TAG_TILE_LENGTH: u16 = 323;
const TAG_TILE_OFFSETS: u16 = 324;
const TAG_TILE_BYTE_COUNTS: u16 = 325;
const TAG_EXTRA_SAMPLES: u16 = 338;
const TAG_SAMPLE_FORMAT: u16 = 339;
const TAG_MODEL_PIXEL_SCALE: u16 = 33550;
const TAG_MODEL_TIEPOINT: u16 = 33922;
const TAG_GEO_KEY_DIRECTORY: u16 = 34735;
const TAG_GDAL_NODATA: u16 = 42113;

const TYPE_BYTE: u16 = 1;
const TYPE_ASCII: u16 = 2;
const TYPE_SHORT: u16 = 3;
const TYPE_LONG: u16 = 4;
const TYPE_DOUBLE: u16 = 12;

const COMPRESSION_NONE: u16 = 1;
const COMPRESSION_DEFLATE: u16 = 8;
const COMPRESSION_DEFLATE_OLD: u16 = 32946;

/// Upper bound on decoded samples, guarding against hostile headers.
pub const MAX_SAMPLES: usize = 1 << 26;

fn tag_name(tag: u16) -> &'static str {
    match tag {
        TAG_IMAGE_WIDTH => "ImageWidth",
        TAG_IMAGE_LENGTH => "ImageLength",
        TAG_BITS_PER_SAMPLE => "BitsPerSample",
        TAG_COMPRESSION => "Compression",
        TAG_STRIP_OFFSETS => "StripOffsets",
        TAG_SAMPLES_PER_PIXEL => "SamplesPerPixel",
        TAG_ROWS_PER_STRIP => "RowsPerStrip",
        TAG_STRIP_BYTE_COUNTS => "StripByteCounts",
        TAG_PLANAR_CONFIG => "PlanarConfiguration",
        TAG_PREDICTOR => "Predictor",
        TAG_TILE_WIDTH => "TileWidth",
        TAG_TILE_LENGTH => "TileLength",
        TAG_TILE_OFFSETS => "TileOffsets",
        TAG_TILE_BYTE_COUNTS => "TileByteCounts",
        TAG_SAMPLE_FORMAT => "SampleFormat",
        TAG_MODEL_PIXEL_SCALE => "ModelPixelScale",
        TAG_MODEL_TIEPOINT => "ModelTiepoint",
        TAG_GDAL_NODATA => "GDAL_NODATA",
        _ => "unknown",
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleKind {
    U8,
    U16,
    F32,
}

impl SampleKind {
    fn bytes(self) -> usize {
        match self {
            SampleKind::U8 => 1,
            SampleKind::U16 => 2,
            SampleKind::F32 => 4,
        }
    }

    fn bits(self) -> u16 {
        8 * self.bytes() as u16
    }

    fn format_code(self) -> u16 {
        match self {
            SampleKind::U8 | SampleKind::U16 => 1,
            SampleKind::F32 => 3,
        }
    }
}

/// A decoded image: one `Vec<f32>` per sample plane, integers promoted.
#[derive(Debug, Clone, PartialEq)]
pub struct TiffImage {
    pub width: usize,
    pub height: usize,
    pub sample_kind: SampleKind,
    pub bands: Vec<Vec<f32>>,
    /// `(scale_x, scale_y)` from ModelPixelScale.
    pub pixel_scale: Option<(f64, f64)>,
    /// Model coordinates of the top-left corner of pixel (0, 0).
    pub tiepoint: Option<(f64, f64)>,
    pub nodata: Option<f32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Compression {
    None,
    Deflate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    Strips {
        rows_per_strip: usize,
    },
    /// Tile edge; TIFF requires a multiple of 16.
    Tiles {
        size: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncodeOptions {
    pub compression: Compression,
    pub layout: Layout,
    pub planar: bool,
}

impl Default for EncodeOptions {
    fn default() -> Self {
        EncodeOptions {
            compression: Compression::Deflate,
            layout: Layout::Strips { rows_per_strip: 16 },
            planar: false,
        }
    }
}

struct Entry {
    tag: u16,
    typ: u16,
    count: usize,
    /// Offset of the value bytes within the file.
    offset: usize,
}

struct Reader<'a> {
    data: &'a [u8],
}

impl<'a> Reader<'a> {
    fn slice(&self, offset: usize, len: usize, tag: Option<&'static str>) -> Result<&'a [u8]> {
        offset
            .checked_add(len)
            .and_then(|end| self.data.get(offset..end))
            .ok_or_else(|| {
                Error::format(
                    tag,
                    format!("{len} bytes at offset {offset} exceed file size {}", self.data.len()),
                )
            })
    }

    fn u16_at(&self, offset: usize) -> Result<u16> {
        let b = self.slice(offset, 2, None)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32_at(&self, offset: usize) -> Result<u32> {
        let b = self.slice(offset, 4, None)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn uints(&self, e: &Entry) -> Result<Vec<u64>> {
        let name = Some(tag_name(e.tag));
        let size = match e.typ {
            TYPE_BYTE => 1,
            TYPE_SHORT => 2,
            TYPE_LONG => 4,
            t => return Err(Error::format(name, format!("expected integer type, got type {t}"))),
        };
        let bytes = self.slice(e.offset, e.count * size, name)?;
        Ok(bytes
            .chunks_exact(size)
            .map(|c| match size {
                1 => u64::from(c[0]),
                2 => u64::from(u16::from_le_bytes([c[0], c[1]])),
                _ => u64::from(u32::from_le_bytes([c[0], c[1], c[2], c[3]])),
            })
            .collect())
    }

    fn doubles(&self, e: &Entry) -> Result<Vec<f64>> {
        let name = Some(tag_name(e.tag));
        if e.typ != TYPE_DOUBLE {
            return Err(Error::format(name, format!("expected DOUBLE, got type {}", e.typ)));
        }
        let bytes = self.slice(e.offset, e.count * 8, name)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect())
    }

    fn ascii(&self, e: &Entry) -> Result<String> {
        let name = Some(tag_name(e.tag));
        if e.typ != TYPE_ASCII {
            return Err(Error::format(name, format!("expected ASCII, got type {}", e.typ)));
        }
        let bytes = self.slice(e.offset, e.count, name)?;
        let s = std::str::from_utf8(bytes).map_err(|_| Error::format(name, "not valid ASCII"))?;
        Ok(s.trim_end_matches('\0').trim().to_string())
    }
}

fn type_size(typ: u16) -> Option<usize> {
    Some(match typ {
        1 | 2 | 6 | 7 => 1,
        3 | 8 => 2,
        4 | 9 | 11 | 13 => 4,
        5 | 10 | 12 => 8,
        _ => return None,
    })
}

/// Decodes a GeoTIFF held in memory.
pub fn decode(data: &[u8]) -> Result<TiffImage> {
    let r = Reader { data };
    let magic = r.slice(0, 4, None)?;
    match magic {
        [b'I', b'I', 42, 0] => {}
        [b'M', b'M', 0, 42] => return Err(Error::format(None, "big-endian TIFF is not supported")),
        [b'I', b'I', 43, 0] | [b'M', b'M', 0, 43] => return Err(Error::format(None, "BigTIFF is not supported")),
        _ => return Err(Error::format(None, "not a TIFF file")),
    }
    let ifd = r.u32_at(4)? as usize;
    let n = r.u16_at(ifd)? as usize;
    let mut entries = Vec::with_capacity(n);
    for i in 0..n {
        let base = ifd + 2 + 12 * i;
        let tag = r.u16_at(base)?;
        let typ = r.u16_at(base + 2)?;
        let count = r.u32_at(base + 4)? as usize;
        let Some(size) = type_size(typ) else {
            // Unknown field types are skippable per TIFF 6.0.
            continue;
        };
        let len = count
            .checked_mul(size)
            .ok_or_else(|| Error::format(Some(tag_name(tag)), "value count overflows"))?;
        let offset = if len <= 4 {
            base + 8
        } else {
            r.u32_at(base + 8)? as usize
        };
        entries.push(Entry {
            tag,
            typ,
            count,
            offset,
        });
    }
    let find = |tag: u16| entries.iter().find(|e| e.tag == tag);
    let required = |tag: u16| find(tag).ok_or_else(|| Error::format(Some(tag_name(tag)), "required tag missing"));
    let single = |tag: u16, default: Option<u64>| -> Result<u64> {
        match find(tag) {
            Some(e) => r
                .uints(e)?
                .first()
                .copied()
                .ok_or_else(|| Error::format(Some(tag_name(tag)), "empty value")),
            None => default.ok_or_else(|| Error::format(Some(tag_name(tag)), "required tag missing")),
        }
    };

    let width = single(TAG_IMAGE_WIDTH, None)? as usize;
    let height = single(TAG_IMAGE_LENGTH, None)? as usize;
    if width == 0 || height == 0 {
        return Err(Error::format(Some("ImageWidth"), "image has zero extent"));
    }
    let spp = single(TAG_SAMPLES_PER_PIXEL, Some(1))? as usize;
    if spp == 0 {
        return Err(Error::format(Some("SamplesPerPixel"), "zero samples per pixel"));
    }
    width
        .checked_mul(height)
        .and_then(|p| p.checked_mul(spp))
        .filter(|&t| t <= MAX_SAMPLES)
        .ok_or_else(|| {
            Error::format(
                Some("ImageWidth"),
                format!("{width}x{height}x{spp} samples exceeds limit"),
            )
        })?;

    let compression = match single(TAG_COMPRESSION, Some(1))? as u16 {
        COMPRESSION_NONE => Compression::None,
        COMPRESSION_DEFLATE | COMPRESSION_DEFLATE_OLD => Compression::Deflate,
        c => {
            return Err(Error::format(
                Some("Compression"),
                format!("unsupported compression {c}"),
            ))
        }
    };
    let predictor = single(TAG_PREDICTOR, Some(1))?;
    if predictor != 1 {
        return Err(Error::format(
            Some("Predictor"),
            format!("unsupported predictor {predictor}"),
        ));
    }
    let planar = match single(TAG_PLANAR_CONFIG, Some(1))? {
        1 => false,
        2 => true,
        p => return Err(Error::format(Some("PlanarConfiguration"), format!("invalid value {p}"))),
    };

    let bits = match find(TAG_BITS_PER_SAMPLE) {
        Some(e) => r.uints(e)?,
        None => vec![1],
    };
    let formats = match find(TAG_SAMPLE_FORMAT) {
        Some(e) => r.uints(e)?,
        None => vec![1],
    };
    let uniform = |v: &[u64], tag: u16| -> Result<u64> {
        let first = *v
            .first()
            .ok_or_else(|| Error::format(Some(tag_name(tag)), "empty value"))?;
        if v.iter().any(|&x| x != first) {
            return Err(Error::format(
                Some(tag_name(tag)),
                "mixed per-sample values are not supported",
            ));
        }
        Ok(first)
    };
    let kind = match (
        uniform(&formats, TAG_SAMPLE_FORMAT)?,
        uniform(&bits, TAG_BITS_PER_SAMPLE)?,
    ) {
        (1, 8) => SampleKind::U8,
        (1, 16) => SampleKind::U16,
        (3, 32) => SampleKind::F32,
        (1 | 3, b) => {
            return Err(Error::format(
                Some("BitsPerSample"),
                format!("unsupported bit depth {b}"),
            ))
        }
        (f, _) => {
            return Err(Error::format(
                Some("SampleFormat"),
                format!("unsupported sample format {f}"),
            ))
        }
    };

    let chunks = ChunkGrid::from_tags(&r, &find, &required, width, height, spp, planar)?;
    for (i, &(offset, len)) in chunks.chunks.iter().enumerate() {
        r.slice(offset, len, Some(chunks.offsets_tag))?;
        let (_, _, rows, cols, _) = chunks.geometry(i);
        let stored_cols = if chunks.tiled { chunks.chunk_w } else { cols };
        let per_px = if planar { 1 } else { spp };
        if compression == Compression::None && len < rows * stored_cols * per_px * kind.bytes() {
            return Err(Error::format(
                Some(chunks.offsets_tag),
                format!("chunk {i} is truncated"),
            ));
        }
    }
    let mut bands = vec![vec![0f32; width * height]; spp];
    let bps = kind.bytes();
    for (i, chunk) in chunks.chunks.iter().enumerate() {
        let (row0, col0, rows, cols, plane) = chunks.geometry(i);
        let samples_per_px = if planar { 1 } else { spp };
        // Tiles are always full-size in the file; strips may be short at the end.
        let stored_cols = if chunks.tiled { chunks.chunk_w } else { cols };
        let expected = rows * stored_cols * samples_per_px * bps;
        let raw = r.slice(chunk.0, chunk.1, Some(chunks.offsets_tag))?;
        let decoded;
        let bytes: &[u8] = match compression {
            Compression::None => raw,
            Compression::Deflate => {
                let mut out = Vec::new();
                flate2::read::ZlibDecoder::new(raw)
                    .take(expected as u64)
                    .read_to_end(&mut out)
                    .map_err(|e| Error::format(Some("Compression"), format!("deflate stream: {e}")))?;
                decoded = out;
                &decoded
            }
        };
        if bytes.len() < expected {
            return Err(Error::format(
                Some(chunks.offsets_tag),
                format!("chunk {i} holds {} bytes, expected {expected}", bytes.len()),
            ));
        }
        for rr in 0..rows {
            for cc in 0..cols {
                for s in 0..samples_per_px {
                    let at = ((rr * stored_cols + cc) * samples_per_px + s) * bps;
                    let b = &bytes[at..at + bps];
                    let v = match kind {
                        SampleKind::U8 => f32::from(b[0]),
                        SampleKind::U16 => f32::from(u16::from_le_bytes([b[0], b[1]])),
                        SampleKind::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]),
                    };
                    let band = if planar { plane } else { s };
                    bands[band][(row0 + rr) * width + col0 + cc] = v;
                }
            }
        }
    }

    let pixel_scale = match find(TAG_MODEL_PIXEL_SCALE) {
        Some(e) => {
            let v = r.doubles(e)?;
            if v.len() < 2 || !v[0].is_finite() || !v[1].is_finite() || v[0] <= 0.0 || v[1] <= 0.0 {
                return Err(Error::format(Some("ModelPixelScale"), format!("invalid scale {v:?}")));
            }
            Some((v[0], v[1]))
        }
        None => None,
    };
    let tiepoint = match find(TAG_MODEL_TIEPOINT) {
        Some(e) => {
            let v = r.doubles(e)?;
            if v.len() < 6 || v[..5].iter().any(|x| !x.is_finite()) {
                return Err(Error::format(Some("ModelTiepoint"), format!("invalid tie point {v:?}")));
            }
            let (sx, sy) = pixel_scale.unwrap_or((1.0, 1.0));
            Some((v[3] - v[0] * sx, v[4] + v[1] * sy))
        }
        None => None,
    };
    let nodata = match find(TAG_GDAL_NODATA) {
        Some(e) => Some(parse_nodata(&r.ascii(e)?)?),
        None => None,
    };

    Ok(TiffImage {
        width,
        height,
        sample_kind: kind,
        bands,
        pixel_scale,
        tiepoint,
        nodata,
    })
}

fn parse_nodata(s: &str) -> Result<f32> {
    if s.eq_ignore_ascii_case("nan") {
        return Ok(f32::NAN);
    }
    s.parse::<f64>()
        .map(|v| v as f32)
        .map_err(|_| Error::format(Some("GDAL_NODATA"), format!("unparsable nodata `{s}`")))
}

struct ChunkGrid {
    tiled: bool,
    chunk_w: usize,
    chunk_h: usize,
    across: usize,
    per_plane: usize,
    width: usize,
    height: usize,
    /// `(offset, byte_count)` per chunk.
    chunks: Vec<(usize, usize)>,
    offsets_tag: &'static str,
}

impl ChunkGrid {
    #[allow(clippy::too_many_arguments)]
    fn from_tags<'e>(
        r: &Reader<'_>,
        find: &dyn Fn(u16) -> Option<&'e Entry>,
        required: &dyn Fn(u16) -> Result<&'e Entry>,
        width: usize,
        height: usize,
        spp: usize,
        planar: bool,
    ) -> Result<Self> {
        let planes = if planar { spp } else { 1 };
        let tiled = find(TAG_TILE_WIDTH).is_some() || find(TAG_TILE_OFFSETS).is_some();
        let (chunk_w, chunk_h, offsets_tag, counts_tag) = if tiled {
            let tw = r.uints(required(TAG_TILE_WIDTH)?)?.first().copied().unwrap_or(0) as usize;
            let th = r.uints(required(TAG_TILE_LENGTH)?)?.first().copied().unwrap_or(0) as usize;
            if tw == 0 || th == 0 || tw > 1 << 13 || th > 1 << 13 {
                return Err(Error::format(Some("TileWidth"), format!("invalid tile size {tw}x{th}")));
            }
            (tw, th, TAG_TILE_OFFSETS, TAG_TILE_BYTE_COUNTS)
        } else {
            let rps = match find(TAG_ROWS_PER_STRIP) {
                Some(e) => r.uints(e)?.first().copied().unwrap_or(0) as usize,
                None => height,
            };
            if rps == 0 {
                return Err(Error::format(Some("RowsPerStrip"), "zero rows per strip"));
            }
            (width, rps.min(height), TAG_STRIP_OFFSETS, TAG_STRIP_BYTE_COUNTS)
        };
        let across = width.div_ceil(chunk_w);
        let down = height.div_ceil(chunk_h);
        let per_plane = across * down;
        let n = per_plane * planes;
        let offsets = r.uints(required(offsets_tag)?)?;
        let counts = r.uints(required(counts_tag)?)?;
        if offsets.len() != n {
            return Err(Error::format(
                Some(tag_name(offsets_tag)),
                format!("{} entries, expected {n}", offsets.len()),
            ));
        }
        if counts.len() != n {
            return Err(Error::format(
                Some(tag_name(counts_tag)),
                format!("{} entries, expected {n}", counts.len()),
            ));
        }
        Ok(ChunkGrid {
            tiled,
            chunk_w,
            chunk_h,
            across,
            per_plane,
            width,
            height,
            chunks: offsets
                .into_iter()
                .zip(counts)
                .map(|(o, c)| (o as usize, c as usize))
                .collect(),
            offsets_tag: tag_name(offsets_tag),
        })
    }

    /// `(row0, col0, rows, cols, plane)` of chunk `i`, clipped to the image.
    fn geometry(&self, i: usize) -> (usize, usize, usize, usize, usize) {
        let plane = i / self.per_plane;
        let j = i % self.per_plane;
        let (ty, tx) = (j / self.across, j % self.across);
        let row0 = ty * self.chunk_h;
        let col0 = tx * self.chunk_w;
        let rows = self.chunk_h.min(self.height - row0);
        let cols = self.chunk_w.min(self.width - col0);
        (row0, col0, rows, cols, plane)
    }
}

/// Image content handed to [`encode`].
pub struct EncodeInput<'a> {
    pub width: usize,
    pub height: usize,
    pub sample_kind: SampleKind,
    pub bands: &'a [Vec<f32>],
    pub geotransform: Option<Geotransform>,
    pub nodata: Option<f32>,
}

pub fn encode_stack(stack: &RasterStack, compression: Compression) -> Result<Vec<u8>> {
    let bands: Vec<Vec<f32>> = stack.bands().map(|(_, g)| g.values().to_vec()).collect();
    let nodata = stack.bands().next().and_then(|(_, g)| g.nodata());
    encode(
        &EncodeInput {
            width: stack.width(),
            height: stack.height(),
            sample_kind: SampleKind::F32,
            bands: &bands,
            geotransform: Some(*stack.geotransform()),
            nodata,
        },
        EncodeOptions {
            compression,
            ..EncodeOptions::default()
        },
    )
}

/// Single uint8 band of 0/1 values.
pub fn encode_mask(mask: &BitMask, gt: &Geotransform) -> Result<Vec<u8>> {
    let band = vec![mask.to_bytes().into_iter().map(f32::from).collect::<Vec<_>>()];
    encode(
        &EncodeInput {
            width: mask.width(),
            height: mask.height(),
            sample_kind: SampleKind::U8,
            bands: &band,
            geotransform: Some(*gt),
            nodata: None,
        },
        EncodeOptions::default(),
    )
}

enum Value {
    Short(Vec<u16>),
    Long(Vec<u32>),
    Double(Vec<f64>),
    Ascii(String),
}

impl Value {
    fn typ(&self) -> u16 {
        match self {
            Value::Short(_) => TYPE_SHORT,
            Value::Long(_) => TYPE_LONG,
            Value::Double(_) => TYPE_DOUBLE,
            Value::Ascii(_) => TYPE_ASCII,
        }
    }

    fn bytes(&self) -> (usize, Vec<u8>) {
        match self {
            Value::Short(v) => (v.len(), v.iter().flat_map(|x| x.to_le_bytes()).collect()),
            Value::Long(v) => (v.len(), v.iter().flat_map(|x| x.to_le_bytes()).collect()),
            Value::Double(v) => (v.len(), v.iter().flat_map(|x| x.to_le_bytes()).collect()),
            Value::Ascii(s) => {
                let mut b = s.as_bytes().to_vec();
                b.push(0);
                (b.len(), b)
            }
        }
    }
}

pub fn encode(input: &EncodeInput<'_>, opts: EncodeOptions) -> Result<Vec<u8>> {
    let (w, h, spp) = (input.width, input.height, input.bands.len());
    if w == 0 || h == 0 || spp == 0 {
        return Err(Error::Shape("cannot encode an empty image".into()));
    }
    if input.bands.iter().any(|b| b.len() != w * h) {
        return Err(Error::Shape("band length does not match image size".into()));
    }
    let (chunk_w, chunk_h, tiled) = match opts.layout {
        Layout::Strips { rows_per_strip } => (w, rows_per_strip.clamp(1, h), false),
        Layout::Tiles { size } => {
            if size == 0 || size % 16 != 0 {
                return Err(Error::Parameter(format!(
                    "tile size {size} must be a positive multiple of 16"
                )));
            }
            (size, size, true)
        }
    };
    let planes = if opts.planar { spp } else { 1 };
    let per_px = if opts.planar { 1 } else { spp };
    let bps = input.sample_kind.bytes();

    let mut out = vec![b'I', b'I', 42, 0, 0, 0, 0, 0];
    let mut offsets = Vec::new();
    let mut counts = Vec::new();
    for plane in 0..planes {
        for row0 in (0..h).step_by(chunk_h) {
            for col0 in (0..w).step_by(chunk_w) {
                let rows = chunk_h.min(h - row0);
                let cols = chunk_w.min(w - col0);
                let (stored_rows, stored_cols) = if tiled { (chunk_h, chunk_w) } else { (rows, cols) };
                let mut raw = Vec::with_capacity(stored_rows * stored_cols * per_px * bps);
                for rr in 0..stored_rows {
                    for cc in 0..stored_cols {
                        for s in 0..per_px {
                            let band = if opts.planar { plane } else { s };
                            let v = if rr < rows && cc < cols {
                                input.bands[band][(row0 + rr) * w + col0 + cc]
                            } else {
                                0.0
                            };
                            push_sample(&mut raw, input.sample_kind, v);
                        }
                    }
                }
                let bytes = match opts.compression {
                    Compression::None => raw,
                    Compression::Deflate => {
                        let mut enc = flate2::write::ZlibEncoder::new(Vec::new(), flate2::Compression::default());
                        enc.write_all(&raw).expect("in-memory write");
                        enc.finish().expect("in-memory write")
                    }
                };
                if out.len() % 2 == 1 {
                    out.push(0);
                }
                offsets.push(u32_offset(out.len())?);
                counts.push(u32_offset(bytes.len())?);
                out.extend_from_slice(&bytes);
            }
        }
    }

    let kind = input.sample_kind;
    let mut tags: Vec<(u16, Value)> = vec![
        (TAG_IMAGE_WIDTH, Value::Long(vec![w as u32])),
        (TAG_IMAGE_LENGTH, Value::Long(vec![h as u32])),
        (TAG_BITS_PER_SAMPLE, Value::Short(vec![kind.bits(); spp])),
        (
            TAG_COMPRESSION,
            Value::Short(vec![match opts.compression {
                Compression::None => COMPRESSION_NONE,
                Compression::Deflate => COMPRESSION_DEFLATE,
            }]),
        ),
        (TAG_PHOTOMETRIC, Value::Short(vec![1])),
        (TAG_SAMPLES_PER_PIXEL, Value::Short(vec![spp as u16])),
        (TAG_PLANAR_CONFIG, Value::Short(vec![if opts.planar { 2 } else { 1 }])),
        (TAG_SAMPLE_FORMAT, Value::Short(vec![kind.format_code(); spp])),
    ];
    if tiled {
        tags.push((TAG_TILE_WIDTH, Value::Long(vec![chunk_w as u32])));
        tags.push((TAG_TILE_LENGTH, Value::Long(vec![chunk_h as u32])));
        tags.push((TAG_TILE_OFFSETS, Value::Long(offsets)));
        tags.push((TAG_TILE_BYTE_COUNTS, Value::Long(counts)));
    } else {
        tags.push((TAG_STRIP_OFFSETS, Value::Long(offsets)));
        tags.push((TAG_ROWS_PER_STRIP, Value::Long(vec![chunk_h as u32])));
        tags.push((TAG_STRIP_BYTE_COUNTS, Value::Long(counts)));
    }
    if spp > 1 {
        tags.push((TAG_EXTRA_SAMPLES, Value::Short(vec![0; spp - 1])));
    }
    if let Some(gt) = input.geotransform {
        tags.push((
            TAG_MODEL_PIXEL_SCALE,
            Value::Double(vec![gt.pixel_size, gt.pixel_size, 0.0]),
        ));
        tags.push((
            TAG_MODEL_TIEPOINT,
            Value::Double(vec![0.0, 0.0, 0.0, gt.origin_easting, gt.origin_northing, 0.0]),
        ));
        // Projected model, pixel-is-area; the CRS itself is left user-defined.
        tags.push((
            TAG_GEO_KEY_DIRECTORY,
            Value::Short(vec![1, 1, 0, 2, 1024, 0, 1, 1, 1025, 0, 1, 1]),
        ));
    }
    if let Some(nd) = input.nodata {
        let text = if nd.is_nan() {
            "nan".to_string()
        } else {
            format!("{nd}")
        };
        tags.push((TAG_GDAL_NODATA, Value::Ascii(text)));
    }
    tags.sort_by_key(|(t, _)| *t);

    if out.len() % 2 == 1 {
        out.push(0);
    }
    let ifd_offset = out.len();
    out[4..8].copy_from_slice(&u32_offset(ifd_offset)?.to_le_bytes());
    let mut extra_at = ifd_offset + 2 + 12 * tags.len() + 4;
    let mut ifd = Vec::new();
    let mut extra = Vec::new();
    ifd.extend_from_slice(&(tags.len() as u16).to_le_bytes());
    for (tag, value) in &tags {
        let (count, bytes) = value.bytes();
        ifd.extend_from_slice(&tag.to_le_bytes());
        ifd.extend_from_slice(&value.typ().to_le_bytes());
        ifd.extend_from_slice(&(count as u32).to_le_bytes());
        if bytes.len() <= 4 {
            let mut inline = [0u8; 4];
            inline[..bytes.len()].copy_from_slice(&bytes);
            ifd.extend_from_slice(&inline);
        } else {
            ifd.extend_from_slice(&u32_offset(extra_at)?.to_le_bytes());
            extra.extend_from_slice(&bytes);
            if bytes.len() % 2 == 1 {
                extra.push(0);
            }
            extra_at = ifd_offset + 2 + 12 * tags.len() + 4 + extra.len();
        }
    }
    ifd.extend_from_slice(&0u32.to_le_bytes());
    out.extend_from_slice(&ifd);
    out.extend_from_slice(&extra);
    Ok(out)
}

fn push_sample(out: &mut Vec<u8>, kind: SampleKind, v: f32) {
    match kind {
        SampleKind::U8 => out.push(v.clamp(0.0, 255.0) as u8),
        SampleKind::U16 => out.extend_from_slice(&(v.clamp(0.0, 65535.0) as u16).to_le_bytes()),
        SampleKind::F32 => out.extend_from_slice(&v.to_le_bytes()),
    }
}

fn u32_offset(n: usize) -> Result<u32> {
    u32::try_from(n).map_err(|_| Error::Parameter("image exceeds classic TIFF 4 GiB limit".into()))
}
