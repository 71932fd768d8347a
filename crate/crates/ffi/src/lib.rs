//! C ABI for the dpchi library. Every function returns an error code
//! (`DPCHI_OK` = 0) and writes results through out-pointers; RNG state is
//! an opaque handle. The matching declarations live in `include/dpchi.h`,
//! which is maintained by hand and covered by a test below.

// C-style names are part of the ABI surface.
#![allow(non_camel_case_types)]

use dpchi::gof;
use dpchi::gwas;
use dpchi::mechanisms::laplace_variance;
use dpchi::minchi::{self, independence_model};
use dpchi::table::ContingencyTable;
use dpchi::{Decision, Error, Histogram, RngStream, StatKind, TestReport};
use std::os::raw::c_char;

pub const DPCHI_OK: i32 = 0;
pub const DPCHI_ERR_DOMAIN: i32 = 1;
pub const DPCHI_ERR_SHAPE: i32 = 2;
pub const DPCHI_ERR_INVALID_NULL: i32 = 3;
pub const DPCHI_ERR_INSUFFICIENT_SAMPLES: i32 = 4;
pub const DPCHI_ERR_DEGENERATE_TABLE: i32 = 5;
pub const DPCHI_ERR_DATA: i32 = 6;
pub const DPCHI_ERR_CONFIG: i32 = 7;
pub const DPCHI_ERR_IO: i32 = 8;
pub const DPCHI_ERR_NULL_POINTER: i32 = 9;

pub const DPCHI_DECISION_FAIL_TO_REJECT: i32 = 0;
pub const DPCHI_DECISION_REJECT: i32 = 1;
pub const DPCHI_DECISION_INCONCLUSIVE: i32 = 2;

fn code_of(err: &Error) -> i32 {
    match err {
        Error::Domain(_) => DPCHI_ERR_DOMAIN,
        Error::Shape(_) => DPCHI_ERR_SHAPE,
        Error::InvalidNull(_) => DPCHI_ERR_INVALID_NULL,
        Error::InsufficientSamples { .. } => DPCHI_ERR_INSUFFICIENT_SAMPLES,
        Error::DegenerateTable(_) => DPCHI_ERR_DEGENERATE_TABLE,
        Error::Data { .. } => DPCHI_ERR_DATA,
        Error::Config(_) => DPCHI_ERR_CONFIG,
        Error::Io { .. } => DPCHI_ERR_IO,
    }
}

/// Mirror of `TestReport` with a flat ABI-stable layout.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct dpchi_report {
    /// One of the DPCHI_DECISION_* constants.
    pub decision: i32,
    pub statistic: f64,
    pub threshold: f64,
    pub df: u32,
    /// Monte-Carlo replicates used, or -1 for asymptotic tests.
    pub mc_samples: i64,
    /// 0 when a minimization stopped on its evaluation budget.
    pub minimizer_converged: i32,
}

fn fill_report(out: &mut dpchi_report, report: &TestReport) {
    out.decision = match report.decision {
        Decision::FailToReject => DPCHI_DECISION_FAIL_TO_REJECT,
        Decision::Reject => DPCHI_DECISION_REJECT,
        Decision::Inconclusive => DPCHI_DECISION_INCONCLUSIVE,
    };
    out.statistic = report.statistic.value;
    out.threshold = report.threshold;
    out.df = report.statistic.df;
    out.mc_samples = report.mc_samples_used.map_or(-1, |m| m as i64);
    out.minimizer_converged = report.minimizer_converged as i32;
}

/// Opaque deterministic RNG stream handle.
pub struct dpchi_rng {
    stream: RngStream,
}

/// Create an RNG stream for (master_seed, stream_id). Never fails.
/// Release with `dpchi_rng_free`.
#[no_mangle]
pub extern "C" fn dpchi_rng_new(master_seed: u64, stream_id: u64) -> *mut dpchi_rng {
    Box::into_raw(Box::new(dpchi_rng {
        stream: RngStream::new(master_seed, stream_id),
    }))
}

/// Free an RNG handle. A null pointer is a no-op.
///
/// # Safety
/// `rng` must be a pointer obtained from `dpchi_rng_new` that has not
/// been freed already.
#[no_mangle]
pub unsafe extern "C" fn dpchi_rng_free(rng: *mut dpchi_rng) {
    if !rng.is_null() {
        drop(Box::from_raw(rng));
    }
}

/// Static name for an error code; never null.
#[no_mangle]
pub extern "C" fn dpchi_error_name(code: i32) -> *const c_char {
    let name: &'static [u8] = match code {
        DPCHI_OK => b"ok\0",
        DPCHI_ERR_DOMAIN => b"domain\0",
        DPCHI_ERR_SHAPE => b"shape\0",
        DPCHI_ERR_INVALID_NULL => b"invalid-null\0",
        DPCHI_ERR_INSUFFICIENT_SAMPLES => b"insufficient-samples\0",
        DPCHI_ERR_DEGENERATE_TABLE => b"degenerate-table\0",
        DPCHI_ERR_DATA => b"data\0",
        DPCHI_ERR_CONFIG => b"config\0",
        DPCHI_ERR_IO => b"io\0",
        DPCHI_ERR_NULL_POINTER => b"null-pointer\0",
        _ => b"unknown\0",
    };
    name.as_ptr() as *const c_char
}

/// epsilon-DP to zCDP conversion: rho = epsilon^2 / 2.
#[no_mangle]
pub unsafe extern "C" fn dpchi_zcdp_of_pure(epsilon: f64, out_rho: *mut f64) -> i32 {
    if out_rho.is_null() {
        return DPCHI_ERR_NULL_POINTER;
    }
    match dpchi::mechanisms::zcdp_of_pure(epsilon) {
        Ok(rho) => {
            *out_rho = rho;
            DPCHI_OK
        }
        Err(e) => code_of(&e),
    }
}

unsafe fn histogram_from_raw(counts: *const u64, d: usize) -> Result<Histogram, Error> {
    Histogram::new(std::slice::from_raw_parts(counts, d).to_vec())
}

fn kind_of(projected: i32) -> StatKind {
    if projected != 0 {
        StatKind::Projected
    } else {
        StatKind::Unprojected
    }
}

/// Asymptotic zCDP goodness-of-fit test.
///
/// # Safety
/// `counts` and `null_probs` must point to `d` readable elements; `rng`
/// must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dpchi_gof_test(
    counts: *const u64,
    d: usize,
    null_probs: *const f64,
    rho: f64,
    alpha: f64,
    projected: i32,
    rng: *mut dpchi_rng,
    out: *mut dpchi_report,
) -> i32 {
    if counts.is_null() || null_probs.is_null() || rng.is_null() || out.is_null() {
        return DPCHI_ERR_NULL_POINTER;
    }
    let p0 = std::slice::from_raw_parts(null_probs, d);
    let result = histogram_from_raw(counts, d).and_then(|h| {
        gof::zcdp_gof_test(&h, rho, alpha, p0, kind_of(projected), &mut (*rng).stream)
    });
    match result {
        Ok(report) => {
            fill_report(&mut *out, &report);
            DPCHI_OK
        }
        Err(e) => code_of(&e),
    }
}

/// Monte-Carlo goodness-of-fit test under pure DP. Pass a positive
/// `noise_variance` to override the default 8/epsilon^2, or 0 to use it.
///
/// # Safety
/// As for `dpchi_gof_test`.
#[no_mangle]
pub unsafe extern "C" fn dpchi_mc_gof_test(
    counts: *const u64,
    d: usize,
    null_probs: *const f64,
    epsilon: f64,
    alpha: f64,
    projected: i32,
    m: usize,
    noise_variance: f64,
    rng: *mut dpchi_rng,
    out: *mut dpchi_report,
) -> i32 {
    if counts.is_null() || null_probs.is_null() || rng.is_null() || out.is_null() {
        return DPCHI_ERR_NULL_POINTER;
    }
    let p0 = std::slice::from_raw_parts(null_probs, d);
    let result = histogram_from_raw(counts, d).and_then(|h| {
        let variance = if noise_variance > 0.0 {
            Ok(noise_variance)
        } else {
            laplace_variance(epsilon)
        }?;
        gof::dp_mc_gof_test_with_variance(
            &h,
            variance,
            alpha,
            p0,
            kind_of(projected),
            m,
            &mut (*rng).stream,
        )
    });
    match result {
        Ok(report) => {
            fill_report(&mut *out, &report);
            DPCHI_OK
        }
        Err(e) => code_of(&e),
    }
}

/// Asymptotic zCDP independence test on a row-major `rows` x `cols`
/// table of counts.
///
/// # Safety
/// `counts` must point to `rows * cols` readable elements; `rng` live;
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dpchi_indep_test(
    counts: *const u64,
    rows: usize,
    cols: usize,
    rho: f64,
    alpha: f64,
    projected: i32,
    rng: *mut dpchi_rng,
    out: *mut dpchi_report,
) -> i32 {
    if counts.is_null() || rng.is_null() || out.is_null() {
        return DPCHI_ERR_NULL_POINTER;
    }
    let flat = std::slice::from_raw_parts(counts, rows.saturating_mul(cols)).to_vec();
    let result = ContingencyTable::from_flat(rows, cols, flat).and_then(|table| {
        let model = independence_model(rows, cols)?;
        minchi::zcdp_min_chi2_test(
            &table.to_histogram()?,
            rho,
            alpha,
            &model,
            kind_of(projected),
            &mut (*rng).stream,
        )
    });
    match result {
        Ok(report) => {
            fill_report(&mut *out, &report);
            DPCHI_OK
        }
        Err(e) => code_of(&e),
    }
}

/// GWAS output-perturbation test on a row-major 3x2 case/control table
/// with an even split.
///
/// # Safety
/// `counts` must point to 6 readable elements; `rng` live; `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn dpchi_gwas_output_perturbation_test(
    counts: *const u64,
    rho: f64,
    alpha: f64,
    rng: *mut dpchi_rng,
    out: *mut dpchi_report,
) -> i32 {
    if counts.is_null() || rng.is_null() || out.is_null() {
        return DPCHI_ERR_NULL_POINTER;
    }
    let flat = std::slice::from_raw_parts(counts, 6).to_vec();
    let result = ContingencyTable::from_flat(3, 2, flat)
        .and_then(|table| gwas::output_perturbation_test(&table, rho, alpha, &mut (*rng).stream));
    match result {
        Ok(report) => {
            fill_report(&mut *out, &report);
            DPCHI_OK
        }
        Err(e) => code_of(&e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CStr;

    fn empty_report() -> dpchi_report {
        dpchi_report {
            decision: -1,
            statistic: 0.0,
            threshold: 0.0,
            df: 0,
            mc_samples: 0,
            minimizer_converged: 0,
        }
    }

    #[test]
    fn gof_round_trip_matches_library() {
        let counts = [520u64, 160, 160, 160];
        let p0 = [0.5, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0];
        let mut out = empty_report();
        unsafe {
            let rng = dpchi_rng_new(7, 0);
            let code =
                dpchi_gof_test(counts.as_ptr(), 4, p0.as_ptr(), 0.01, 0.05, 1, rng, &mut out);
            dpchi_rng_free(rng);
            assert_eq!(code, DPCHI_OK);
        }
        let expected = {
            let mut rng = RngStream::new(7, 0);
            let h = Histogram::new(counts.to_vec()).unwrap();
            gof::zcdp_gof_test(&h, 0.01, 0.05, &p0, StatKind::Projected, &mut rng).unwrap()
        };
        assert_eq!(out.statistic, expected.statistic.value);
        assert_eq!(out.threshold, expected.threshold);
        assert_eq!(out.df, 3);
        assert_eq!(out.mc_samples, -1);
        assert_eq!(out.minimizer_converged, 1);
    }

    #[test]
    fn mc_gof_reports_samples_and_insufficient_m() {
        let counts = [520u64, 160, 160, 160];
        let p0 = [0.5, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0];
        let mut out = empty_report();
        unsafe {
            let rng = dpchi_rng_new(1, 0);
            let code = dpchi_mc_gof_test(
                counts.as_ptr(),
                4,
                p0.as_ptr(),
                0.3,
                0.05,
                1,
                59,
                0.0,
                rng,
                &mut out,
            );
            assert_eq!(code, DPCHI_OK);
            assert_eq!(out.mc_samples, 59);
            let code = dpchi_mc_gof_test(
                counts.as_ptr(),
                4,
                p0.as_ptr(),
                0.3,
                0.05,
                1,
                5,
                0.0,
                rng,
                &mut out,
            );
            assert_eq!(code, DPCHI_ERR_INSUFFICIENT_SAMPLES);
            dpchi_rng_free(rng);
        }
    }

    #[test]
    fn indep_and_gwas_paths() {
        let table = [300u64, 320, 160, 150];
        let mut out = empty_report();
        unsafe {
            let rng = dpchi_rng_new(2, 0);
            let code = dpchi_indep_test(table.as_ptr(), 2, 2, 0.01, 0.05, 1, rng, &mut out);
            assert_eq!(code, DPCHI_OK);
            assert_eq!(out.df, 1);

            let gwas_table = [170u64, 160, 165, 170, 165, 170];
            let code = dpchi_gwas_output_perturbation_test(
                gwas_table.as_ptr(),
                0.001,
                0.05,
                rng,
                &mut out,
            );
            assert_eq!(code, DPCHI_OK);
            assert_eq!(out.df, 2);

            // Uneven split is a domain error.
            let bad = [170u64, 161, 165, 170, 165, 170];
            let code =
                dpchi_gwas_output_perturbation_test(bad.as_ptr(), 0.001, 0.05, rng, &mut out);
            assert_eq!(code, DPCHI_ERR_DOMAIN);
            dpchi_rng_free(rng);
        }
    }

    #[test]
    fn null_pointers_are_rejected() {
        let counts = [10u64, 10];
        let p0 = [0.5, 0.5];
        let mut out = empty_report();
        unsafe {
            let rng = dpchi_rng_new(0, 0);
            assert_eq!(
                dpchi_gof_test(
                    std::ptr::null(),
                    2,
                    p0.as_ptr(),
                    0.1,
                    0.05,
                    1,
                    rng,
                    &mut out
                ),
                DPCHI_ERR_NULL_POINTER
            );
            assert_eq!(
                dpchi_gof_test(
                    counts.as_ptr(),
                    2,
                    p0.as_ptr(),
                    0.1,
                    0.05,
                    1,
                    rng,
                    std::ptr::null_mut()
                ),
                DPCHI_ERR_NULL_POINTER
            );
            dpchi_rng_free(rng);
            dpchi_rng_free(std::ptr::null_mut());
        }
    }

    #[test]
    fn conversion_and_error_names() {
        let mut rho = 0.0;
        unsafe {
            assert_eq!(dpchi_zcdp_of_pure(0.0447213595499958, &mut rho), DPCHI_OK);
            assert!((rho - 0.001).abs() < 1e-12);
            assert_eq!(dpchi_zcdp_of_pure(-1.0, &mut rho), DPCHI_ERR_DOMAIN);
        }
        for code in 0..=9 {
            let name = unsafe { CStr::from_ptr(dpchi_error_name(code)) };
            assert!(!name.to_str().unwrap().is_empty());
        }
        let unknown = unsafe { CStr::from_ptr(dpchi_error_name(99)) };
        assert_eq!(unknown.to_str().unwrap(), "unknown");
    }

    #[test]
    fn determinism_through_handles() {
        let counts = [520u64, 160, 160, 160];
        let p0 = [0.5, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0];
        let run = || {
            let mut out = empty_report();
            unsafe {
                let rng = dpchi_rng_new(42, 9);
                dpchi_mc_gof_test(
                    counts.as_ptr(),
                    4,
                    p0.as_ptr(),
                    0.3,
                    0.05,
                    1,
                    59,
                    0.0,
                    rng,
                    &mut out,
                );
                dpchi_rng_free(rng);
            }
            out
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn header_declares_every_export() {
        let header = include_str!("../include/dpchi.h");
        for symbol in [
            "dpchi_rng_new",
            "dpchi_rng_free",
            "dpchi_error_name",
            "dpchi_zcdp_of_pure",
            "dpchi_gof_test",
            "dpchi_mc_gof_test",
            "dpchi_indep_test",
            "dpchi_gwas_output_perturbation_test",
            "dpchi_report",
            "DPCHI_OK",
        ] {
            assert!(header.contains(symbol), "header is missing {symbol}");
        }
    }
}
