//! Reader and writer for a strict subset of the NIfTI-1 file format.
//!
//! A supported file is a single-file volume: a 348-byte header, optional
//! extension padding up to `vox_offset`, then a dense voxel payload. Scalar
//! datatypes uint8 (code 2), int16 (code 4), and float32 (code 16) are
//! handled, other codes are rejected. The header must declare exactly three
//! spatial dimensions. Byte order is detected from `sizeof_hdr`, which reads
//! as 348 only under the byte order the file was written with; both orders
//! are accepted on input. Files are always written little-endian with
//! `vox_offset` 352, `scl_slope` 1, `scl_inter` 0, and spatial units of
//! millimetres. Scale slope and intercept are ignored on read, voxel values
//! arrive exactly as stored.
//!
//! The intensity unit of a volume is recorded in the free-text `descrip`
//! field when writing. On read, a recognized `descrip` tag restores the unit;
//! otherwise the unit is inferred from the datatype: uint8 maps to 8-bit
//! display values, int16 to Hounsfield units, float32 to normalized values.
//!
//! With the `gzip` feature enabled, files whose payload starts with the gzip
//! magic bytes are decompressed transparently on read, and paths ending in
//! `.gz` are compressed on write.

use std::fs;
use std::io::Write;
use std::path::Path;

use byteorder::{BigEndian, ByteOrder, LittleEndian};

use crate::error::{Error, Result};
use crate::volume::{Geometry, IntensityUnit, ScalarKind, Volume, VoxelData};

/// Byte offsets of the NIfTI-1 header fields used by this subset.
mod layout {
    pub const SIZEOF_HDR: usize = 0; // i32
    pub const DIM: usize = 40; // [i16; 8]
    pub const DATATYPE: usize = 70; // i16
    pub const BITPIX: usize = 72; // i16
    pub const PIXDIM: usize = 76; // [f32; 8]
    pub const VOX_OFFSET: usize = 108; // f32
    pub const SCL_SLOPE: usize = 112; // f32
    pub const SCL_INTER: usize = 116; // f32
    pub const XYZT_UNITS: usize = 123; // u8
    pub const DESCRIP: usize = 148; // [u8; 80]
    pub const MAGIC: usize = 344; // [u8; 4]
}

const HEADER_LEN: usize = 348;
const WRITTEN_VOX_OFFSET: usize = 352;
const MAGIC_SINGLE: &[u8; 4] = b"n+1\0";
const MAGIC_PAIR: &[u8; 4] = b"ni1\0";
const UNITS_MM: u8 = 2;

const DT_UINT8: i16 = 2;
const DT_INT16: i16 = 4;
const DT_FLOAT32: i16 = 16;

const DESCRIP_HU: &str = "unit=hounsfield";
const DESCRIP_NORM: &str = "unit=normalized";
const DESCRIP_DISP: &str = "unit=display8bit";

fn malformed(path: &Path, reason: impl Into<String>) -> Error {
    Error::MalformedFile {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

fn datatype_of(kind: ScalarKind) -> (i16, i16) {
    match kind {
        ScalarKind::U8 => (DT_UINT8, 8),
        ScalarKind::I16 => (DT_INT16, 16),
        ScalarKind::F32 => (DT_FLOAT32, 32),
    }
}

/// Loads a volume from a `.nii` file (or `.nii.gz` with the `gzip` feature).
pub fn load_nifti(path: impl AsRef<Path>) -> Result<Volume> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| Error::ReadError {
        path: path.to_path_buf(),
        source,
    })?;
    let bytes = maybe_decompress(path, bytes)?;
    if bytes.len() < HEADER_LEN {
        return Err(malformed(path, "file is shorter than the 348-byte header"));
    }
    match LittleEndian::read_i32(&bytes[layout::SIZEOF_HDR..]) {
        348 => parse::<LittleEndian>(path, &bytes),
        _ if BigEndian::read_i32(&bytes[layout::SIZEOF_HDR..]) == 348 => {
            parse::<BigEndian>(path, &bytes)
        }
        other => Err(malformed(
            path,
            format!("sizeof_hdr is {other}, expected 348 in either byte order"),
        )),
    }
}

fn maybe_decompress(path: &Path, bytes: Vec<u8>) -> Result<Vec<u8>> {
    if bytes.len() < 2 || bytes[0] != 0x1f || bytes[1] != 0x8b {
        return Ok(bytes);
    }
    #[cfg(feature = "gzip")]
    {
        use std::io::Read;
        let mut out = Vec::new();
        flate2::read::GzDecoder::new(bytes.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| malformed(path, format!("gzip decompression failed: {e}")))?;
        Ok(out)
    }
    #[cfg(not(feature = "gzip"))]
    Err(malformed(
        path,
        "gzip-compressed input, rebuild with the `gzip` feature to read it",
    ))
}

fn parse<E: ByteOrder>(path: &Path, bytes: &[u8]) -> Result<Volume> {
    let magic = &bytes[layout::MAGIC..layout::MAGIC + 4];
    if magic != MAGIC_SINGLE && magic != MAGIC_PAIR {
        return Err(malformed(path, format!("bad magic {magic:?}")));
    }

    let ndim = E::read_i16(&bytes[layout::DIM..]);
    if ndim != 3 {
        return Err(Error::UnsupportedDimensionality { ndim });
    }
    let mut dims = [0usize; 3];
    for (a, d) in dims.iter_mut().enumerate() {
        let raw = E::read_i16(&bytes[layout::DIM + 2 * (a + 1)..]);
        if raw < 1 {
            return Err(malformed(path, format!("dim[{}] is {raw}", a + 1)));
        }
        *d = raw as usize;
    }

    let code = E::read_i16(&bytes[layout::DATATYPE..]);
    let kind = match code {
        DT_UINT8 => ScalarKind::U8,
        DT_INT16 => ScalarKind::I16,
        DT_FLOAT32 => ScalarKind::F32,
        _ => return Err(Error::UnsupportedDatatype { code }),
    };
    let (_, expected_bitpix) = datatype_of(kind);
    let bitpix = E::read_i16(&bytes[layout::BITPIX..]);
    if bitpix != expected_bitpix {
        return Err(malformed(
            path,
            format!("bitpix {bitpix} does not match datatype code {code}"),
        ));
    }

    let mut spacing = [0f64; 3];
    for (a, s) in spacing.iter_mut().enumerate() {
        let raw = E::read_f32(&bytes[layout::PIXDIM + 4 * (a + 1)..]);
        if !raw.is_finite() || raw <= 0.0 {
            return Err(malformed(path, format!("pixdim[{}] is {raw}", a + 1)));
        }
        *s = f64::from(raw);
    }

    let vox_offset_raw = E::read_f32(&bytes[layout::VOX_OFFSET..]);
    if !vox_offset_raw.is_finite()
        || vox_offset_raw.fract() != 0.0
        || vox_offset_raw < HEADER_LEN as f32
    {
        return Err(malformed(path, format!("vox_offset is {vox_offset_raw}")));
    }
    let vox_offset = vox_offset_raw as u64;

    let geometry = Geometry::new(dims, spacing).map_err(|e| malformed(path, e.to_string()))?;
    let count = geometry.voxel_count() as u64;
    let payload_len = count * u64::from(expected_bitpix as u16 / 8);
    let end = vox_offset + payload_len;
    if (bytes.len() as u64) < end {
        return Err(malformed(
            path,
            format!("payload needs {end} bytes, file has {}", bytes.len()),
        ));
    }
    let payload = &bytes[vox_offset as usize..end as usize];

    let n = count as usize;
    let data = match kind {
        ScalarKind::U8 => VoxelData::U8(payload.to_vec()),
        ScalarKind::I16 => {
            let mut v = vec![0i16; n];
            E::read_i16_into(payload, &mut v);
            VoxelData::I16(v)
        }
        ScalarKind::F32 => {
            let mut v = vec![0f32; n];
            E::read_f32_into(payload, &mut v);
            VoxelData::F32(v)
        }
    };

    let unit = unit_from_header(&bytes[layout::DESCRIP..layout::DESCRIP + 80], kind);
    Volume::new(geometry, unit, data)
}

fn unit_from_header(descrip: &[u8], kind: ScalarKind) -> IntensityUnit {
    let text = descrip.split(|&b| b == 0).next().unwrap_or(&[]);
    match text {
        t if t == DESCRIP_HU.as_bytes() => IntensityUnit::Hounsfield,
        t if t == DESCRIP_NORM.as_bytes() => IntensityUnit::Normalized,
        t if t == DESCRIP_DISP.as_bytes() => IntensityUnit::Display8Bit,
        _ => match kind {
            ScalarKind::U8 => IntensityUnit::Display8Bit,
            ScalarKind::I16 => IntensityUnit::Hounsfield,
            ScalarKind::F32 => IntensityUnit::Normalized,
        },
    }
}

/// Saves a volume as a little-endian single-file `.nii` (gzip-compressed when
/// the path ends in `.gz` and the `gzip` feature is enabled).
pub fn save_nifti(volume: &Volume, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let write_err = |source| Error::WriteError {
        path: path.to_path_buf(),
        source,
    };

    let mut header = [0u8; WRITTEN_VOX_OFFSET];
    LittleEndian::write_i32(&mut header[layout::SIZEOF_HDR..], HEADER_LEN as i32);
    LittleEndian::write_i16(&mut header[layout::DIM..], 3);
    for (a, &d) in volume.geometry().dims.iter().enumerate() {
        if d > i16::MAX as usize {
            return Err(write_err(std::io::Error::other(format!(
                "dim {d} exceeds the NIfTI-1 limit of {}",
                i16::MAX
            ))));
        }
        LittleEndian::write_i16(&mut header[layout::DIM + 2 * (a + 1)..], d as i16);
    }
    for a in 4..8 {
        LittleEndian::write_i16(&mut header[layout::DIM + 2 * a..], 1);
    }

    let (code, bitpix) = datatype_of(volume.data().kind());
    LittleEndian::write_i16(&mut header[layout::DATATYPE..], code);
    LittleEndian::write_i16(&mut header[layout::BITPIX..], bitpix);

    LittleEndian::write_f32(&mut header[layout::PIXDIM..], 1.0);
    for (a, &s) in volume.geometry().spacing.iter().enumerate() {
        LittleEndian::write_f32(&mut header[layout::PIXDIM + 4 * (a + 1)..], s as f32);
    }

    LittleEndian::write_f32(&mut header[layout::VOX_OFFSET..], WRITTEN_VOX_OFFSET as f32);
    LittleEndian::write_f32(&mut header[layout::SCL_SLOPE..], 1.0);
    LittleEndian::write_f32(&mut header[layout::SCL_INTER..], 0.0);
    header[layout::XYZT_UNITS] = UNITS_MM;

    let tag = match volume.unit() {
        IntensityUnit::Hounsfield => DESCRIP_HU,
        IntensityUnit::Normalized => DESCRIP_NORM,
        IntensityUnit::Display8Bit => DESCRIP_DISP,
    };
    header[layout::DESCRIP..layout::DESCRIP + tag.len()].copy_from_slice(tag.as_bytes());
    header[layout::MAGIC..layout::MAGIC + 4].copy_from_slice(MAGIC_SINGLE);

    let payload = encode_payload(volume.data());

    let file = fs::File::create(path).map_err(write_err)?;
    let mut out: Box<dyn Write> = boxed_writer(file, path);
    out.write_all(&header).map_err(write_err)?;
    out.write_all(&payload).map_err(write_err)?;
    out.flush().map_err(write_err)
}

fn encode_payload(data: &VoxelData) -> Vec<u8> {
    match data {
        VoxelData::U8(v) => v.clone(),
        VoxelData::I16(v) => {
            let mut bytes = vec![0u8; v.len() * 2];
            LittleEndian::write_i16_into(v, &mut bytes);
            bytes
        }
        VoxelData::F32(v) => {
            let mut bytes = vec![0u8; v.len() * 4];
            LittleEndian::write_f32_into(v, &mut bytes);
            bytes
        }
    }
}

#[cfg(feature = "gzip")]
fn boxed_writer(file: fs::File, path: &Path) -> Box<dyn Write> {
    if path.extension().is_some_and(|e| e == "gz") {
        Box::new(flate2::write::GzEncoder::new(
            std::io::BufWriter::new(file),
            flate2::Compression::default(),
        ))
    } else {
        Box::new(std::io::BufWriter::new(file))
    }
}

#[cfg(not(feature = "gzip"))]
fn boxed_writer(file: fs::File, _path: &Path) -> Box<dyn Write> {
    Box::new(std::io::BufWriter::new(file))
}
