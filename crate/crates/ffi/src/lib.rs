//! C ABI over the `vlcsim` simulator.
//!
//! Every entry point returns a [`VlcsimStatus`] and writes results through
//! out-pointers. Sweep configurations and reports are opaque handles owned
//! by the caller and released with their `_free` function. When a call
//! fails, [`vlcsim_last_error`] describes why; the message belongs to the
//! calling thread and stays valid until that thread's next failing call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use vlcsim::analytics::{self, SyncProbabilityInputs};
use vlcsim::channel::{self, ChannelParams};
use vlcsim::harness::{self, emit_report, Format, SweepConfig, SweepReport};
use vlcsim::serial::{oversample_bits, uart_decode, uart_encode, Parity, UartConfig};
use vlcsim::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VlcsimStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Config = 3,
    Io = 4,
    BufferTooSmall = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VlcsimParity {
    None = 0,
    Even = 1,
    Odd = 2,
    Mark = 3,
    Space = 4,
}

impl From<VlcsimParity> for Parity {
    fn from(p: VlcsimParity) -> Self {
        match p {
            VlcsimParity::None => Parity::None,
            VlcsimParity::Even => Parity::Even,
            VlcsimParity::Odd => Parity::Odd,
            VlcsimParity::Mark => Parity::Mark,
            VlcsimParity::Space => Parity::Space,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VlcsimFormat {
    Csv = 0,
    Json = 1,
}

/// Character framing.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct VlcsimUart {
    pub data_bits: u8,
    pub parity: VlcsimParity,
    pub stop_bits: u8,
    pub baud: f64,
    pub oversample: u32,
}

/// Link geometry. Angles in degrees, lengths in metres, areas in m^2.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct VlcsimChannel {
    pub area_rx: f64,
    pub half_angle: f64,
    pub theta: f64,
    pub psi: f64,
    pub psi_c: f64,
    pub d: f64,
    pub d1: f64,
    pub d2: f64,
    pub alpha: f64,
    pub beta: f64,
    pub area_reflector: f64,
    pub rho: f64,
    pub tx_power: f64,
    pub responsivity_gain: f64,
    pub noise_power: f64,
}

impl From<ChannelParams> for VlcsimChannel {
    fn from(p: ChannelParams) -> Self {
        VlcsimChannel {
            area_rx: p.area_rx,
            half_angle: p.half_angle,
            theta: p.theta,
            psi: p.psi,
            psi_c: p.psi_c,
            d: p.d,
            d1: p.d1,
            d2: p.d2,
            alpha: p.alpha,
            beta: p.beta,
            area_reflector: p.area_reflector,
            rho: p.rho,
            tx_power: p.tx_power,
            responsivity_gain: p.responsivity_gain,
            noise_power: p.noise_power,
        }
    }
}

impl From<&VlcsimChannel> for ChannelParams {
    fn from(c: &VlcsimChannel) -> Self {
        ChannelParams {
            area_rx: c.area_rx,
            half_angle: c.half_angle,
            theta: c.theta,
            psi: c.psi,
            psi_c: c.psi_c,
            d: c.d,
            d1: c.d1,
            d2: c.d2,
            alpha: c.alpha,
            beta: c.beta,
            area_reflector: c.area_reflector,
            rho: c.rho,
            tx_power: c.tx_power,
            responsivity_gain: c.responsivity_gain,
            noise_power: c.noise_power,
        }
    }
}

/// One row of a sweep report. Fields that do not apply are NaN
/// (`snr_db`, `distance_m`, rates of a skipped point) or 0 (counts).
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct VlcsimPointSummary {
    pub baud: f64,
    pub snr_db: f64,
    pub distance_m: f64,
    pub frame_len: u64,
    pub sync_len: u64,
    pub seed: u64,
    pub skipped: bool,
    pub frames_sent: u64,
    pub clean: u64,
    pub substituted: u64,
    pub dropped: u64,
    pub p_bse: f64,
    pub reliability: f64,
    pub measured_ser: f64,
    pub analytic_ber: f64,
    pub analytic_ser: f64,
    pub analytic_pfail: f64,
    pub analytic_perr: f64,
}

/// Opaque sweep configuration.
pub struct VlcsimConfig(SweepConfig);

/// Opaque sweep result.
pub struct VlcsimReport(SweepReport);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> VlcsimStatus {
    match e {
        Error::Config { .. } => VlcsimStatus::Config,
        Error::Io { .. } | Error::Json(_) | Error::Csv(_) => VlcsimStatus::Io,
        _ => VlcsimStatus::InvalidInput,
    }
}

fn fail(status: VlcsimStatus, msg: &str) -> VlcsimStatus {
    set_error(msg);
    status
}

/// Runs `f`, turning errors and panics into status codes.
fn guard<F: FnOnce() -> Result<(), VlcsimStatus>>(f: F) -> VlcsimStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => VlcsimStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(VlcsimStatus::Panic, "internal panic"),
    }
}

fn lift<T>(r: vlcsim::Result<T>) -> Result<T, VlcsimStatus> {
    r.map_err(|e| fail(status_of(&e), &e.to_string()))
}

unsafe fn out_ref<'a, T>(p: *mut T) -> Result<&'a mut T, VlcsimStatus> {
    p.as_mut()
        .ok_or_else(|| fail(VlcsimStatus::NullPointer, "null output pointer"))
}

unsafe fn in_ref<'a, T>(p: *const T) -> Result<&'a T, VlcsimStatus> {
    p.as_ref()
        .ok_or_else(|| fail(VlcsimStatus::NullPointer, "null input pointer"))
}

unsafe fn in_str<'a>(p: *const c_char) -> Result<&'a str, VlcsimStatus> {
    if p.is_null() {
        return Err(fail(VlcsimStatus::NullPointer, "null string"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(VlcsimStatus::InvalidInput, "string is not UTF-8"))
}

unsafe fn in_slice<'a, T>(p: *const T, len: usize) -> Result<&'a [T], VlcsimStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(VlcsimStatus::NullPointer, "null buffer"));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// Copies `src` into a caller buffer, reporting the needed length either way.
unsafe fn fill<T: Copy>(src: &[T], out: *mut T, cap: usize, written: *mut usize) -> Result<(), VlcsimStatus> {
    *out_ref(written)? = src.len();
    if src.len() > cap {
        return Err(fail(
            VlcsimStatus::BufferTooSmall,
            &format!("need {} elements, buffer holds {cap}", src.len()),
        ));
    }
    if !src.is_empty() {
        if out.is_null() {
            return Err(fail(VlcsimStatus::NullPointer, "null buffer"));
        }
        ptr::copy_nonoverlapping(src.as_ptr(), out, src.len());
    }
    Ok(())
}

fn uart_of(u: &VlcsimUart) -> Result<UartConfig, VlcsimStatus> {
    lift(UartConfig::new(
        u.data_bits,
        u.parity.into(),
        u.stop_bits,
        u.baud,
        u.oversample,
    ))
}

/// Message for the last failing call on this thread; empty if none.
#[no_mangle]
pub extern "C" fn vlcsim_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

#[no_mangle]
pub extern "C" fn vlcsim_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// OOK bit error probability at linear SNR `snr`.
///
/// # Safety
/// `out` must be a valid pointer to a `double`.
#[no_mangle]
pub unsafe extern "C" fn vlcsim_ber_ook(snr: f64, out: *mut f64) -> VlcsimStatus {
    guard(|| {
        *out_ref(out)? = lift(analytics::ber_ook(snr))?;
        Ok(())
    })
}

/// Character error rate of an 8-data-bit UART at linear SNR `snr`, clamped
/// to [0, 1].
///
/// # Safety
/// `out` must be a valid pointer to a `double`.
#[no_mangle]
pub unsafe extern "C" fn vlcsim_ser_ttl(snr: f64, out: *mut f64) -> VlcsimStatus {
    guard(|| {
        *out_ref(out)? = lift(analytics::ser_ttl(snr))?;
        Ok(())
    })
}

fn sync_inputs(n_sync: u32, n_payload: u32, p_s: f64, alphabet_size: u32) -> SyncProbabilityInputs {
    SyncProbabilityInputs {
        alphabet_size,
        ..SyncProbabilityInputs::new(n_sync, n_payload, p_s)
    }
}

/// Probability that a frame's sync word is not recognised.
///
/// # Safety
/// `out` must be a valid pointer to a `double`.
#[no_mangle]
pub unsafe extern "C" fn vlcsim_p_fail(
    n_sync: u32,
    n_payload: u32,
    p_s: f64,
    alphabet_size: u32,
    out: *mut f64,
) -> VlcsimStatus {
    guard(|| {
        *out_ref(out)? = lift(analytics::p_fail(&sync_inputs(n_sync, n_payload, p_s, alphabet_size)))?;
        Ok(())
    })
}

/// Probability of a false or failed frame synchronisation.
///
/// # Safety
/// `out` must be a valid pointer to a `double`.
#[no_mangle]
pub unsafe extern "C" fn vlcsim_p_err(
    n_sync: u32,
    n_payload: u32,
    p_s: f64,
    alphabet_size: u32,
    out: *mut f64,
) -> VlcsimStatus {
    guard(|| {
        *out_ref(out)? = lift(analytics::p_err(&sync_inputs(n_sync, n_payload, p_s, alphabet_size)))?;
        Ok(())
    })
}

/// # Safety
/// `out` must be a valid pointer to a `double`.
#[no_mangle]
pub unsafe extern "C" fn vlcsim_lambertian_order(half_angle_deg: f64, out: *mut f64) -> VlcsimStatus {
    guard(|| {
        *out_ref(out)? = lift(channel::lambertian_order(half_angle_deg))?;
        Ok(())
    })
}

/// Largest link distance with no first-order reflection in view.
///
/// # Safety
/// `out` must be a valid pointer to a `double`.
#[no_mangle]
pub unsafe extern "C" fn vlcsim_max_los_distance(
    w: f64,
    alpha_plus_beta_deg: f64,
    theta_max_deg: f64,
    out: *mut f64,
) -> VlcsimStatus {
    guard(|| {
        *out_ref(out)? = lift(channel::max_los_distance(w, alpha_plus_beta_deg, theta_max_deg))?;
        Ok(())
    })
}

/// Fills `out` with the default link geometry.
///
/// # Safety
/// `out` must be a valid pointer to a `VlcsimChannel`.
#[no_mangle]
pub unsafe extern "C" fn vlcsim_channel_default(out: *mut VlcsimChannel) -> VlcsimStatus {
    guard(|| {
        *out_ref(out)? = ChannelParams::default().into();
        Ok(())
    })
}

/// # Safety
/// `params` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn vlcsim_h_los(params: *const VlcsimChannel, out: *mut f64) -> VlcsimStatus {
    guard(|| {
        let p = ChannelParams::from(in_ref(params)?);
        *out_ref(out)? = lift(channel::h_los(&p))?;
        Ok(())
    })
}

/// # Safety
/// `params` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn vlcsim_h_nlos(params: *const VlcsimChannel, out: *mut f64) -> VlcsimStatus {
    guard(|| {
        let p = ChannelParams::from(in_ref(params)?);
        *out_ref(out)? = lift(channel::h_nlos(&p))?;
        Ok(())
    })
}

/// Linear SNR the link in `params` delivers.
///
/// # Safety
/// `params` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn vlcsim_received_snr(
    params: *const VlcsimChannel,
    include_nlos: bool,
    out: *mut f64,
) -> VlcsimStatus {
    guard(|| {
        let p = ChannelParams::from(in_ref(params)?);
        *out_ref(out)? = lift(channel::received_snr(&p, include_nlos))?;
        Ok(())
    })
}

/// Fills `out` with 8N1 framing at 10 kbaud and 16x oversampling.
///
/// # Safety
/// `out` must be a valid pointer to a `VlcsimUart`.
#[no_mangle]
pub unsafe extern "C" fn vlcsim_uart_default(out: *mut VlcsimUart) -> VlcsimStatus {
    guard(|| {
        let d = UartConfig::default();
        *out_ref(out)? = VlcsimUart {
            data_bits: d.data_bits,
            parity: VlcsimParity::None,
            stop_bits: d.stop_bits,
            baud: d.baud,
            oversample: d.oversample,
        };
        Ok(())
    })
}

/// Encodes `len` bytes into line bits (one 0/1 byte per bit period).
/// `*written` always receives the required length; the call fails with
/// `BufferTooSmall` when `cap` is short.
///
/// # Safety
/// `uart` and `written` must be valid; `bytes` must hold `len` bytes and
/// `out` must have room for `cap` bytes.
#[no_mangle]
pub unsafe extern "C" fn vlcsim_uart_encode(
    uart: *const VlcsimUart,
    bytes: *const u8,
    len: usize,
    out: *mut u8,
    cap: usize,
    written: *mut usize,
) -> VlcsimStatus {
    guard(|| {
        let cfg = uart_of(in_ref(uart)?)?;
        let line = lift(uart_encode(in_slice(bytes, len)?, &cfg))?;
        fill(line.as_slice(), out, cap, written)
    })
}

/// Decodes a clean oversampled rendering of `bits` (as produced by
/// [`vlcsim_uart_encode`]), framed by one idle bit on each side.
///
/// # Safety
/// `uart` and `written` must be valid; `bits` must hold `len` bytes and
/// `out` must have room for `cap` bytes.
#[no_mangle]
pub unsafe extern "C" fn vlcsim_uart_decode_bits(
    uart: *const VlcsimUart,
    bits: *const u8,
    len: usize,
    out: *mut u8,
    cap: usize,
    written: *mut usize,
) -> VlcsimStatus {
    guard(|| {
        let cfg = uart_of(in_ref(uart)?)?;
        let line = vlcsim::serial::LineBits::from_bits(in_slice(bits, len)?.to_vec()).padded(1, 1);
        let samples = oversample_bits(&line, cfg.oversample as usize);
        let decoded = lift(uart_decode(&samples, &cfg, 0))?;
        fill(&decoded.bytes, out, cap, written)
    })
}

/// Default sweep configuration.
///
/// # Safety
/// `out` must be a valid pointer; the handle stored there must be released
/// with [`vlcsim_config_free`].
#[no_mangle]
pub unsafe extern "C" fn vlcsim_config_new(out: *mut *mut VlcsimConfig) -> VlcsimStatus {
    guard(|| {
        *out_ref(out)? = Box::into_raw(Box::new(VlcsimConfig(SweepConfig::default())));
        Ok(())
    })
}

/// Parses key=value configuration text.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn vlcsim_config_parse(text: *const c_char, out: *mut *mut VlcsimConfig) -> VlcsimStatus {
    guard(|| {
        let slot = out_ref(out)?;
        let cfg = lift(SweepConfig::parse(in_str(text)?))?;
        *slot = Box::into_raw(Box::new(VlcsimConfig(cfg)));
        Ok(())
    })
}

/// Loads a configuration file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn vlcsim_config_load(path: *const c_char, out: *mut *mut VlcsimConfig) -> VlcsimStatus {
    guard(|| {
        let slot = out_ref(out)?;
        let cfg = lift(SweepConfig::load(Path::new(in_str(path)?)))?;
        *slot = Box::into_raw(Box::new(VlcsimConfig(cfg)));
        Ok(())
    })
}

/// # Safety
/// `cfg` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn vlcsim_config_set_seed(cfg: *mut VlcsimConfig, seed: u64) -> VlcsimStatus {
    guard(|| {
        out_ref(cfg)?.0.base_seed = seed;
        Ok(())
    })
}

/// # Safety
/// `cfg` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn vlcsim_config_set_workers(cfg: *mut VlcsimConfig, workers: usize) -> VlcsimStatus {
    guard(|| {
        out_ref(cfg)?.0.workers = workers;
        Ok(())
    })
}

/// Number of parameter points the sweep will visit.
///
/// # Safety
/// `cfg` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn vlcsim_config_point_count(cfg: *const VlcsimConfig, out: *mut usize) -> VlcsimStatus {
    guard(|| {
        let n = in_ref(cfg)?.0.points().len();
        *out_ref(out)? = n;
        Ok(())
    })
}

/// # Safety
/// `cfg` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn vlcsim_config_free(cfg: *mut VlcsimConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Runs the sweep. Blocks until every point finishes.
///
/// # Safety
/// `cfg` must be a live handle and `out` a valid pointer; the report must
/// be released with [`vlcsim_report_free`].
#[no_mangle]
pub unsafe extern "C" fn vlcsim_sweep_run(cfg: *const VlcsimConfig, out: *mut *mut VlcsimReport) -> VlcsimStatus {
    guard(|| {
        let cfg = in_ref(cfg)?;
        let slot = out_ref(out)?;
        let report = lift(harness::run_sweep(&cfg.0))?;
        *slot = Box::into_raw(Box::new(VlcsimReport(report)));
        Ok(())
    })
}

/// # Safety
/// `report` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn vlcsim_report_point_count(report: *const VlcsimReport, out: *mut usize) -> VlcsimStatus {
    guard(|| {
        let n = in_ref(report)?.0.points.len();
        *out_ref(out)? = n;
        Ok(())
    })
}

/// # Safety
/// `report` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn vlcsim_report_point(
    report: *const VlcsimReport,
    index: usize,
    out: *mut VlcsimPointSummary,
) -> VlcsimStatus {
    guard(|| {
        let r = in_ref(report)?;
        let slot = out_ref(out)?;
        let p = r.0.points.get(index).ok_or_else(|| {
            fail(
                VlcsimStatus::InvalidInput,
                &format!("point {index} out of range (report has {})", r.0.points.len()),
            )
        })?;
        let s = p.stats.as_ref();
        let a = p.analytic.as_ref();
        let nan = f64::NAN;
        *slot = VlcsimPointSummary {
            baud: p.point.baud,
            snr_db: p.snr_db.unwrap_or(nan),
            distance_m: p.point.distance_m.unwrap_or(nan),
            frame_len: p.point.frame_len as u64,
            sync_len: p.point.sync_len as u64,
            seed: p.seed,
            skipped: p.skipped.is_some(),
            frames_sent: s.map_or(0, |s| s.frames_sent),
            clean: s.map_or(0, |s| s.clean),
            substituted: s.map_or(0, |s| s.substituted),
            dropped: s.map_or(0, |s| s.dropped),
            p_bse: s.map_or(nan, |s| s.p_bse),
            reliability: s.map_or(nan, |s| s.reliability),
            measured_ser: s.map_or(nan, |s| s.measured_ser),
            analytic_ber: a.map_or(nan, |a| a.ber),
            analytic_ser: a.map_or(nan, |a| a.ser),
            analytic_pfail: a.map_or(nan, |a| a.p_fail),
            analytic_perr: a.map_or(nan, |a| a.p_err),
        };
        Ok(())
    })
}

/// Writes the report to `path`.
///
/// # Safety
/// `report` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn vlcsim_report_write(
    report: *const VlcsimReport,
    path: *const c_char,
    format: VlcsimFormat,
) -> VlcsimStatus {
    guard(|| {
        let r = in_ref(report)?;
        let path = in_str(path)?;
        let format = match format {
            VlcsimFormat::Csv => Format::Csv,
            VlcsimFormat::Json => Format::Json,
        };
        lift(emit_report(&r.0, format, Path::new(path)))
    })
}

/// # Safety
/// `report` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn vlcsim_report_free(report: *mut VlcsimReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}
