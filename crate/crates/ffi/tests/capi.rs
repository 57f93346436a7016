use std::ffi::{CStr, CString};
use std::process::Command;
use std::ptr;

use tsperf_ffi::*;

fn series(values: &[f64]) -> *mut TsperfSeries {
    let mut s = ptr::null_mut();
    let st = unsafe { tsperf_series_new(ptr::null(), values.as_ptr(), values.len(), &mut s) };
    assert_eq!(st, TsperfStatus::Ok);
    s
}

fn last_error() -> String {
    let p = tsperf_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string()
}

fn part(plan: *const TsperfPlan, it: usize, which: TsperfPart) -> Vec<usize> {
    let mut data = ptr::null();
    let mut len = 0;
    assert_eq!(unsafe { tsperf_plan_part(plan, it, which, &mut data, &mut len) }, TsperfStatus::Ok);
    unsafe { std::slice::from_raw_parts(data, len) }.to_vec()
}

#[test]
fn series_round_trip() {
    let s = series(&[1.0, 2.0, 3.5]);
    unsafe {
        assert_eq!(tsperf_series_len(s), 3);
        assert_eq!(std::slice::from_raw_parts(tsperf_series_values(s), 3), &[1.0, 2.0, 3.5]);
        tsperf_series_free(s);
        assert_eq!(tsperf_series_len(ptr::null()), 0);
        tsperf_series_free(ptr::null_mut());
    }
}

#[test]
fn bad_input_sets_status_and_message() {
    let mut s = ptr::null_mut();
    let nan = [1.0, f64::NAN];
    assert_eq!(unsafe { tsperf_series_new(ptr::null(), nan.as_ptr(), 2, &mut s) }, TsperfStatus::Parse);
    assert!(s.is_null());
    assert!(last_error().contains("non-finite"));

    assert_eq!(unsafe { tsperf_series_new(ptr::null(), ptr::null(), 4, &mut s) }, TsperfStatus::NullPointer);

    let method = CString::new("Nope").unwrap();
    let cfg = tsperf_plan_config_default();
    let mut plan = ptr::null_mut();
    assert_eq!(unsafe { tsperf_plan_new(method.as_ptr(), 50, &cfg, &mut plan) }, TsperfStatus::UnknownMethod);
    assert!(last_error().contains("Nope"));

    let path = CString::new("/nonexistent/file.csv").unwrap();
    assert_eq!(unsafe { tsperf_series_load_csv(path.as_ptr(), 0, &mut s) }, TsperfStatus::Io);

    // a successful call clears the message
    let ok = series(&[1.0]);
    assert!(tsperf_last_error().is_null());
    unsafe { tsperf_series_free(ok) };
}

#[test]
fn blocked_plan_accessors() {
    let method = CString::new("CV-hvBl").unwrap();
    let cfg = TsperfPlanConfig {
        folds: 4,
        removal: 2,
        ..tsperf_plan_config_default()
    };
    let mut plan = ptr::null_mut();
    assert_eq!(unsafe { tsperf_plan_new(method.as_ptr(), 20, &cfg, &mut plan) }, TsperfStatus::Ok);
    assert_eq!(unsafe { tsperf_plan_iterations(plan) }, 4);
    assert_eq!(part(plan, 1, TsperfPart::Test), (5..10).collect::<Vec<_>>());
    assert_eq!(part(plan, 1, TsperfPart::Gap), vec![3, 4, 10, 11]);
    assert_eq!(part(plan, 1, TsperfPart::Train), vec![0, 1, 2, 12, 13, 14, 15, 16, 17, 18, 19]);

    let mut data = ptr::null();
    let mut len = 0;
    assert_eq!(
        unsafe { tsperf_plan_part(plan, 4, TsperfPart::Test, &mut data, &mut len) },
        TsperfStatus::InvalidArgument
    );

    let mut json = ptr::null_mut();
    assert_eq!(unsafe { tsperf_plan_to_json(plan, &mut json) }, TsperfStatus::Ok);
    let text = unsafe { CStr::from_ptr(json) }.to_str().unwrap().to_string();
    let back = tsperf::ResamplingPlan::from_json(&text).unwrap();
    assert_eq!(back.iterations.len(), 4);
    unsafe {
        tsperf_string_free(json);
        tsperf_plan_free(plan);
    }
}

#[test]
fn knn_cross_validation_by_hand() {
    let s = series(&[1.0, 3.0, 2.0, 5.0, 4.0, 8.0, 6.0, 7.0, 9.0]);
    let method = CString::new("CV-Bl").unwrap();
    let cfg = TsperfPlanConfig {
        folds: 2,
        ..tsperf_plan_config_default()
    };
    let learner = TsperfLearner {
        kind: TsperfLearnerKind::Knn,
        neighbours: 1,
        ..tsperf_learner_default()
    };
    let mut g = 0.0;
    assert_eq!(
        unsafe { tsperf_estimate_loss(s, method.as_ptr(), &cfg, &learner, 1, &mut g) },
        TsperfStatus::Ok
    );
    assert!((g - (21.5f64.sqrt() + 18.5f64.sqrt()) / 2.0).abs() < 1e-12);
    unsafe { tsperf_series_free(s) };
}

#[test]
fn true_loss_matches_core() {
    let values: Vec<f64> = (0..60).map(|i| ((i as f64) * 0.7).sin() + 2.0).collect();
    let est = series(&values[..42]);
    let val = series(&values[42..]);
    let learner = tsperf_learner_default();
    let mut loss = 0.0;
    assert_eq!(unsafe { tsperf_true_loss(est, val, &learner, 3, &mut loss) }, TsperfStatus::Ok);
    let a = tsperf::TimeSeries::new("a", values[..42].to_vec()).unwrap();
    let b = tsperf::TimeSeries::new("b", values[42..].to_vec()).unwrap();
    let expected = tsperf::true_loss(&a, &b, &tsperf::LearnerSpec::default(), 3).unwrap();
    assert_eq!(loss, expected);
    unsafe {
        tsperf_series_free(est);
        tsperf_series_free(val);
    }
}

#[test]
fn rmse_and_sign_test() {
    let mut r = 0.0;
    assert_eq!(unsafe { tsperf_rmse([1.0, 2.0].as_ptr(), [2.0, 4.0].as_ptr(), 2, &mut r) }, TsperfStatus::Ok);
    assert!((r - 2.5f64.sqrt()).abs() < 1e-15);
    assert_eq!(unsafe { tsperf_rmse(ptr::null(), ptr::null(), 0, &mut r) }, TsperfStatus::InvalidArgument);

    let diffs = [-5.0; 20];
    let mut t = TsperfSignTest::default();
    assert_eq!(
        unsafe { tsperf_bayes_sign_test(diffs.as_ptr(), 20, -2.5, 2.5, 10_000, 1.0, 3, &mut t) },
        TsperfStatus::Ok
    );
    assert_eq!((t.count_left, t.count_rope, t.count_right), (20, 0, 0));
    assert!(t.p_left > 0.99);
    assert!((t.p_left + t.p_rope + t.p_right - 1.0).abs() < 1e-9);
}

#[test]
fn embedding_dimension_of_constant_series() {
    let s = series(&[3.0; 80]);
    let mut d = 0;
    assert_eq!(unsafe { tsperf_embedding_dimension(s, 10, 0.01, 10.0, 2.0, &mut d) }, TsperfStatus::Ok);
    assert_eq!(d, 1);
    assert_eq!(
        unsafe { tsperf_embedding_dimension(s, 0, 0.01, 10.0, 0.0, &mut d) },
        TsperfStatus::InvalidArgument
    );
    unsafe { tsperf_series_free(s) };
}

#[test]
fn version_is_package_version() {
    let v = unsafe { CStr::from_ptr(tsperf_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_compiles_as_c() {
    let include = concat!(env!("CARGO_MANIFEST_DIR"), "/include");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"tsperf.h\"\n\
         int main(void) {\n\
           TsperfSeries *s = 0;\n\
           double v[3] = {1, 2, 3};\n\
           TsperfPlanConfig cfg = tsperf_plan_config_default();\n\
           TsperfStatus st = tsperf_series_new(\"x\", v, 3, &s);\n\
           tsperf_series_free(s);\n\
           return st == TSPERF_STATUS_OK && cfg.folds == 10 ? 0 : 1;\n\
         }\n",
    )
    .unwrap();
    let Ok(out) = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I", include])
        .arg(&src)
        .output()
    else {
        eprintln!("no C compiler, skipping");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
