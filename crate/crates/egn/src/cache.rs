//! Binary on-disk cache for interference tensors.
//!
//! Tensors are pure functions of the physical configuration and the
//! quadrature resolution, so entries are keyed by a digest of both. Anything
//! unexpected in a cache file (old format, foreign config, bit rot) makes it
//! stale: the engine recomputes and overwrites instead of trusting it.

use std::fs;
use std::io::ErrorKind;
use std::path::{Path, PathBuf};

use fiberplan_core::fingerprint::{config_fingerprint, fingerprint_hex};
use fiberplan_core::SystemConfig;
use sha2::{Digest, Sha256};

use crate::xtensor::{span_classes, XTensorSet};
use crate::EgnError;

const MAGIC: [u8; 4] = *b"FPXT";
pub const CACHE_FORMAT_VERSION: u32 = 1;

/// Outcome of a cache lookup.
pub enum CacheRead {
    Hit(XTensorSet),
    Absent,
    /// File exists but cannot be used; the reason is reportable.
    Stale(String),
}

/// How [`load_or_build`] obtained its tensors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CacheStatus {
    Hit,
    MissComputed,
    StaleRecomputed(String),
    Disabled,
}

/// File name for a config/resolution pair inside the cache directory.
pub fn cache_file_name(cfg: &SystemConfig, points: u32) -> String {
    let fp = fingerprint_hex(cfg);
    format!("xt-{}-r{points}.bin", &fp[..16])
}

/// Header fields of a cache file, for diagnostics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CacheFileInfo {
    pub version: u32,
    pub fingerprint_hex: String,
    pub points: u32,
    pub n_channels: u32,
    pub n_modes: u32,
    pub n_classes: u32,
    pub file_bytes: u64,
}

/// Loads tensors, consulting the cache directory when given. Unusable cache
/// files are recomputed and rewritten; only I/O failures are errors.
pub fn load_or_build(
    cfg: &SystemConfig,
    dir: Option<&Path>,
) -> Result<(XTensorSet, CacheStatus), EgnError> {
    let points = cfg.solver.quad_points_per_band;
    let Some(dir) = dir else {
        return Ok((XTensorSet::build(cfg)?, CacheStatus::Disabled));
    };
    let path = dir.join(cache_file_name(cfg, points));
    match read_cache(cfg, points, &path)? {
        CacheRead::Hit(xt) => Ok((xt, CacheStatus::Hit)),
        CacheRead::Absent => {
            let xt = XTensorSet::build(cfg)?;
            write_cache(cfg, &xt, &path)?;
            Ok((xt, CacheStatus::MissComputed))
        }
        CacheRead::Stale(reason) => {
            let xt = XTensorSet::build(cfg)?;
            write_cache(cfg, &xt, &path)?;
            Ok((xt, CacheStatus::StaleRecomputed(reason)))
        }
    }
}

/// Reads a cache file and checks it against the expected config/resolution.
pub fn read_cache(
    cfg: &SystemConfig,
    points: u32,
    path: &Path,
) -> Result<CacheRead, EgnError> {
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == ErrorKind::NotFound => return Ok(CacheRead::Absent),
        Err(e) => return Err(e.into()),
    };
    match parse_cache(cfg, points, &bytes) {
        Ok(tensors) => Ok(CacheRead::Hit(XTensorSet::from_parts(cfg, points, tensors))),
        Err(reason) => Ok(CacheRead::Stale(reason)),
    }
}

/// Serialises tensors; writes via a sibling temp file so readers never see a
/// half-written cache.
pub fn write_cache(cfg: &SystemConfig, xt: &XTensorSet, path: &Path) -> Result<(), EgnError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    let bytes = serialize_cache(cfg, xt);
    let tmp = temp_sibling(path);
    fs::write(&tmp, &bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Parses just the header, erroring loudly on malformed files (diagnostics
/// path, unlike the self-healing [`read_cache`]).
pub fn inspect_cache_file(path: &Path) -> Result<CacheFileInfo, EgnError> {
    let bytes = fs::read(path)?;
    parse_header(&bytes)
        .map(|(info, _)| CacheFileInfo { file_bytes: bytes.len() as u64, ..info })
        .map_err(|reason| EgnError::CacheFormat { path: path.display().to_string(), reason })
}

fn temp_sibling(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".tmp");
    path.with_file_name(name)
}

fn serialize_cache(cfg: &SystemConfig, xt: &XTensorSet) -> Vec<u8> {
    let (classes, _) = span_classes(cfg);
    let mut body = Vec::new();
    for (class, data) in classes.iter().zip(xt.raw_tensors()) {
        body.extend_from_slice(&(class.fiber as u32).to_le_bytes());
        body.extend_from_slice(&class.length_km.to_bits().to_le_bytes());
        body.extend_from_slice(&(data.len() as u64).to_le_bytes());
        for &x in data {
            body.extend_from_slice(&x.to_le_bytes());
        }
    }
    let mut out = Vec::with_capacity(84 + body.len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&CACHE_FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&config_fingerprint(cfg));
    out.extend_from_slice(&xt.points_per_band().to_le_bytes());
    out.extend_from_slice(&(xt.n_channels() as u32).to_le_bytes());
    out.extend_from_slice(&(xt.n_modes() as u32).to_le_bytes());
    out.extend_from_slice(&(classes.len() as u32).to_le_bytes());
    out.extend_from_slice(&Sha256::digest(&body));
    out.extend_from_slice(&body);
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| "truncated".to_string())?;
        let slice = &self.buf[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

fn parse_header(bytes: &[u8]) -> Result<(CacheFileInfo, [u8; 32]), String> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err("bad magic (not a tensor cache file)".into());
    }
    let version = r.u32()?;
    if version != CACHE_FORMAT_VERSION {
        return Err(format!(
            "format version {version} (this build reads {CACHE_FORMAT_VERSION})"
        ));
    }
    let fp: [u8; 32] = r.take(32)?.try_into().unwrap();
    let points = r.u32()?;
    let n_channels = r.u32()?;
    let n_modes = r.u32()?;
    let n_classes = r.u32()?;
    r.take(32)?; // payload digest, verified against the body by parse_cache
    let info = CacheFileInfo {
        version,
        fingerprint_hex: fp.iter().map(|b| format!("{b:02x}")).collect(),
        points,
        n_channels,
        n_modes,
        n_classes,
        file_bytes: 0,
    };
    Ok((info, fp))
}

fn parse_cache(cfg: &SystemConfig, points: u32, bytes: &[u8]) -> Result<Vec<Vec<f64>>, String> {
    let (info, fp) = parse_header(bytes)?;
    if fp != config_fingerprint(cfg) {
        return Err("fingerprint mismatch (written for a different config)".into());
    }
    if info.points != points {
        return Err(format!("resolution {} (expected {points})", info.points));
    }
    let (classes, _) = span_classes(cfg);
    if info.n_channels as usize != cfg.plan.n_channels
        || info.n_modes as usize != cfg.n_modes()
        || info.n_classes as usize != classes.len()
    {
        return Err("shape mismatch against the config".into());
    }

    const HEADER_LEN: usize = 4 + 4 + 32 + 4 + 4 + 4 + 4 + 32;
    let body = &bytes[HEADER_LEN..];
    let digest: [u8; 32] = bytes[HEADER_LEN - 32..HEADER_LEN].try_into().unwrap();
    if <[u8; 32]>::from(Sha256::digest(body)) != digest {
        return Err("payload digest mismatch (file is corrupt)".into());
    }

    let mut r = Reader { buf: body, pos: 0 };
    let expected_len = {
        let n = cfg.plan.n_channels;
        let d = cfg.n_modes();
        n * d * d * n * n * n
    };
    let mut tensors = Vec::with_capacity(classes.len());
    for class in &classes {
        let fiber = r.u32()? as usize;
        let length_bits = r.u64()?;
        if fiber != class.fiber || length_bits != class.length_km.to_bits() {
            return Err("span class layout mismatch against the config".into());
        }
        let len = r.u64()? as usize;
        if len != expected_len {
            return Err(format!("tensor length {len} (expected {expected_len})"));
        }
        let raw = r.take(len * 8)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        tensors.push(data);
    }
    if r.pos != body.len() {
        return Err("trailing data after the last tensor".into());
    }
    Ok(tensors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use fiberplan_core::config::parse_config;

    fn small_config() -> SystemConfig {
        let text = r#"
[plan]
n_channels = 1
symbol_rate = { value = 32.0, unit = "GBd" }
bandwidth = { value = 32.0, unit = "GHz" }
spacing = { value = 50.0, unit = "GHz" }
center_wavelength = { value = 1550.0, unit = "nm" }

[constellation]
preset = "qpsk"

[receiver]
noise_power = { value = -28.0, unit = "dBm" }

[solver]
quad_points_per_band = 8

[[fiber]]
name = "fmf"
gamma = { value = 1.3, unit = "1/W/km" }
coupling = [[1.0, 0.661], [0.661, 1.053]]

[[fiber.mode]]
name = "LP01"
attenuation = { value = 0.226, unit = "dB/km" }
beta2 = { value = 31.86, unit = "ps^2/km" }
beta3 = { value = 0.1452, unit = "ps^3/km" }

[[fiber.mode]]
name = "LP11a"
attenuation = { value = 0.226, unit = "dB/km" }
beta1 = { value = 6.5, unit = "ns/km" }
beta2 = { value = 34.8, unit = "ps^2/km" }
beta3 = { value = 0.1452, unit = "ps^3/km" }

[[amplifier]]
name = "edfa"
noise_figure = { value = 6.0, unit = "dB" }
max_gain = { value = 30.0, unit = "dB" }
saturation_power = { value = 25.0, unit = "dBm" }

[link]
booster_gain = { value = 20.0, unit = "dB" }

[[link.span]]
length = { value = 80.0, unit = "km" }
fiber = "fmf"
amplifier = "edfa"
count = 2

[[link.span]]
length = { value = 60.0, unit = "km" }
fiber = "fmf"
amplifier = "edfa"

[[lightpath]]
id = "L1"
first_span = 1
last_span = 3
channels = [1]
modes = ["LP01", "LP11a"]
required_snr = { value = 5.5, unit = "dB" }
"#;
        parse_config(text).unwrap()
    }

    fn raw_equal(a: &XTensorSet, b: &XTensorSet) -> bool {
        a.raw_tensors().len() == b.raw_tensors().len()
            && a.raw_tensors().iter().zip(b.raw_tensors()).all(|(x, y)| {
                x.len() == y.len()
                    && x.iter().zip(y).all(|(u, v)| u.to_bits() == v.to_bits())
            })
    }

    #[test]
    fn roundtrip_is_bitwise_identical() {
        let cfg = small_config();
        let dir = tempfile::tempdir().unwrap();
        let (built, status) = load_or_build(&cfg, Some(dir.path())).unwrap();
        assert_eq!(status, CacheStatus::MissComputed);
        let (cached, status) = load_or_build(&cfg, Some(dir.path())).unwrap();
        assert_eq!(status, CacheStatus::Hit);
        assert!(raw_equal(&built, &cached));

        let info = inspect_cache_file(
            &dir.path().join(cache_file_name(&cfg, cfg.solver.quad_points_per_band)),
        )
        .unwrap();
        assert_eq!(info.version, CACHE_FORMAT_VERSION);
        assert_eq!(info.n_classes, 2);
        assert_eq!(info.points, 8);
    }

    #[test]
    fn corrupted_payload_is_stale_and_recomputed() {
        let cfg = small_config();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(cache_file_name(&cfg, 8));
        let (_, _) = load_or_build(&cfg, Some(dir.path())).unwrap();

        let mut bytes = fs::read(&path).unwrap();
        let mid = bytes.len() - 9;
        bytes[mid] ^= 0x40;
        fs::write(&path, &bytes).unwrap();

        match read_cache(&cfg, 8, &path).unwrap() {
            CacheRead::Stale(reason) => assert!(reason.contains("digest"), "{reason}"),
            _ => panic!("corrupt file must read as stale"),
        }
        let (_, status) = load_or_build(&cfg, Some(dir.path())).unwrap();
        assert!(matches!(status, CacheStatus::StaleRecomputed(_)));
        // The rewrite healed the file.
        let (_, status) = load_or_build(&cfg, Some(dir.path())).unwrap();
        assert_eq!(status, CacheStatus::Hit);
    }

    #[test]
    fn truncated_and_foreign_files_are_stale() {
        let cfg = small_config();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(cache_file_name(&cfg, 8));
        load_or_build(&cfg, Some(dir.path())).unwrap();

        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..40]).unwrap();
        match read_cache(&cfg, 8, &path).unwrap() {
            CacheRead::Stale(reason) => assert!(reason.contains("truncated"), "{reason}"),
            _ => panic!("truncated file must read as stale"),
        }

        fs::write(&path, b"not a cache").unwrap();
        match read_cache(&cfg, 8, &path).unwrap() {
            CacheRead::Stale(reason) => assert!(reason.contains("magic"), "{reason}"),
            _ => panic!("foreign file must read as stale"),
        }
        assert!(inspect_cache_file(&path).is_err());

        // A config change (different constellation) orphans the fingerprint.
        let mut other = cfg.clone();
        other.constellation = fiberplan_core::ConstellationMoments::gaussian();
        let (built, status) = load_or_build(&other, Some(dir.path())).unwrap();
        // Different fingerprint means a different file name: plain miss.
        assert_eq!(status, CacheStatus::MissComputed);
        let stale = dir.path().join(cache_file_name(&cfg, 8));
        fs::rename(dir.path().join(cache_file_name(&other, 8)), &stale).unwrap();
        match read_cache(&cfg, 8, &stale).unwrap() {
            CacheRead::Stale(reason) => assert!(reason.contains("fingerprint"), "{reason}"),
            _ => panic!("foreign fingerprint must read as stale"),
        }
        drop(built);
    }

    #[test]
    fn absent_file_reads_as_absent() {
        let cfg = small_config();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("missing.bin");
        assert!(matches!(read_cache(&cfg, 8, &path).unwrap(), CacheRead::Absent));
    }
}
