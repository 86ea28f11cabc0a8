use std::ffi::{CStr, CString};
use std::path::Path;
use std::ptr;

use wavescope::detector::{band_swap_attack, train_logistic, TrainConfig};
use wavescope::video_io::Clip;
use wavescope_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(ws_last_error()) }.to_string_lossy().into_owned()
}

fn cpath(p: &Path) -> CString {
    CString::new(p.to_str().unwrap()).unwrap()
}

fn ramp(frames: usize, h: usize, w: usize, phase: f32) -> Vec<f32> {
    (0..frames * h * w).map(|i| ((i as f32 * 0.37 + phase).sin() + 1.0) / 2.0).collect()
}

unsafe fn clip_of(data: &[f32], frames: usize, h: usize, w: usize) -> *mut WsClip {
    let mut c = ptr::null_mut();
    assert_eq!(ws_clip_from_luma(frames, h, w, data.as_ptr(), &mut c), WsStatus::Ok);
    c
}

unsafe fn luma(c: *const WsClip) -> Vec<f32> {
    let (mut f, mut h, mut w) = (0, 0, 0);
    assert_eq!(ws_clip_dims(c, &mut f, &mut h, &mut w), WsStatus::Ok);
    let mut buf = vec![0.0f32; f * h * w];
    assert_eq!(ws_clip_copy_luma(c, buf.as_mut_ptr(), buf.len()), WsStatus::Ok);
    buf
}

#[test]
fn clip_round_trips_through_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = cpath(&dir.path().join("c.wvt"));
    let data = ramp(2, 8, 8, 0.0);
    unsafe {
        let c = clip_of(&data, 2, 8, 8);
        assert_eq!(ws_clip_save(c, path.as_ptr()), WsStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(ws_clip_load(path.as_ptr(), &mut back), WsStatus::Ok);
        assert_eq!(luma(back), data);
        ws_clip_free(c);
        ws_clip_free(back);
    }
}

#[test]
fn band_energies_sum_to_frame_energy() {
    let data = ramp(1, 16, 16, 0.3);
    let mut e = [0.0f64; 16];
    unsafe {
        let c = clip_of(&data, 1, 16, 16);
        assert_eq!(ws_band_energies(c, 0, 3, e.as_mut_ptr(), e.len()), WsStatus::Ok);
        assert_eq!(ws_band_energies(c, 0, 3, e.as_mut_ptr(), 4), WsStatus::InvalidArgument);
        assert!(last_error().contains("need 16"));
        ws_clip_free(c);
    }
    let total: f64 = data.iter().map(|&v| (v as f64).powi(2)).sum();
    assert!((e.iter().sum::<f64>() - total).abs() < 1e-6 * total);
}

#[test]
fn waverep_all_returns_real_and_attack_matches_core() {
    let (fd, rd) = (ramp(2, 16, 16, 0.0), ramp(2, 16, 16, 1.7));
    let all = CString::new("all").unwrap();
    unsafe {
        let (f, r) = (clip_of(&fd, 2, 16, 16), clip_of(&rd, 2, 16, 16));
        let mut out = ptr::null_mut();
        assert_eq!(ws_waverep(f, r, all.as_ptr(), 2, &mut out), WsStatus::Ok);
        for (a, b) in luma(out).iter().zip(&rd) {
            assert!((a - b).abs() < 1e-5);
        }
        ws_clip_free(out);
        assert_eq!(ws_attack(r, f, 2, &mut out), WsStatus::Ok);
        let expect = band_swap_attack(&Clip::new(2, 16, 16, rd.clone()).unwrap(), &Clip::new(2, 16, 16, fd.clone()).unwrap(), 2).unwrap();
        assert_eq!(luma(out), expect.data);
        ws_clip_free(out);
        ws_clip_free(f);
        ws_clip_free(r);
    }
}

#[test]
fn model_scores_clip() {
    let dir = tempfile::tempdir().unwrap();
    let xs: Vec<Vec<f64>> = (0..20).map(|i| (0..16).map(|k| (i % 2) as f64 + 0.01 * k as f64).collect()).collect();
    let ys: Vec<u8> = (0..20).map(|i| (i % 2) as u8).collect();
    let mut m = train_logistic(&xs, &ys, &TrainConfig { epochs: 50, ..TrainConfig::default() }, 1).unwrap();
    m.levels = 3;
    let path = dir.path().join("m.json");
    m.save(&path).unwrap();
    let p = cpath(&path);
    let data = ramp(2, 16, 16, 0.5);
    unsafe {
        let mut model = ptr::null_mut();
        assert_eq!(ws_model_load(p.as_ptr(), &mut model), WsStatus::Ok);
        let c = clip_of(&data, 2, 16, 16);
        let (mut logit, mut prob) = (f64::NAN, f64::NAN);
        assert_eq!(ws_model_score(model, c, &mut logit, &mut prob), WsStatus::Ok);
        assert!(logit.is_finite());
        assert!((prob - 1.0 / (1.0 + (-logit).exp())).abs() < 1e-12);
        ws_model_free(model);
        ws_clip_free(c);
    }
}

#[test]
fn failures_report_status_and_message() {
    let missing = CString::new("/nonexistent/clip.y4m").unwrap();
    unsafe {
        let mut c = ptr::null_mut();
        assert_eq!(ws_clip_load(missing.as_ptr(), &mut c), WsStatus::Io);
        assert!(c.is_null());
        assert!(last_error().contains("/nonexistent/clip.y4m"));
        assert_eq!(ws_clip_load(ptr::null(), &mut c), WsStatus::NullPointer);
        assert_eq!(last_error(), "null pointer: path");
        let data = [0.5f32; 12];
        assert_eq!(ws_clip_from_luma(1, 3, 4, data.as_ptr(), ptr::null_mut()), WsStatus::NullPointer);
        let c = clip_of(&data, 1, 3, 4);
        assert_eq!(last_error(), "");
        let mut e = [0.0; 4];
        assert_eq!(ws_band_energies(c, 0, 1, e.as_mut_ptr(), 4), WsStatus::Dimension);
        ws_clip_free(c);
        ws_clip_free(ptr::null_mut());
    }
}

/// The generated header must compile as C when a compiler is present.
#[test]
fn header_compiles_as_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/wavescope.h");
    assert!(std::fs::read_to_string(&header).unwrap().contains("ws_model_score"));
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"wavescope.h\"\nint main(void) { WsClip *c = 0; WsStatus s = ws_clip_load(\"x\", &c); ws_clip_free(c); return s == WS_STATUS_OK; }\n",
    )
    .unwrap();
    let Ok(out) = std::process::Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(header.parent().unwrap())
        .arg(&src)
        .output()
    else {
        eprintln!("no C compiler; skipped");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
