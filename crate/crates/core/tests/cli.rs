use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use espcn::cli::{Y4mHeader, Y4mReader};
use espcn::data::{decode_pnm, encode_pnm, Image, Plane, RgbImage};
use espcn::model::{load_model, save_model, Architecture, EspcnModel, Layer};
use espcn::tensor::{Activation, ConvKernel};

fn espcn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_espcn")).args(args).output().expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn textured(h: usize, w: usize, phase: f64) -> Plane {
    Plane::from_fn(h, w, |y, x| {
        let (y, x) = (y as f64, x as f64);
        127.5 + 90.0 * (x * 0.37 + phase).sin() * (y * 0.21 - phase).cos() + 30.0 * ((x + y) * 0.13).sin()
    })
}

fn write_gray(path: &Path, plane: &Plane) {
    fs::write(path, encode_pnm(&Image::Gray(plane.clone()))).unwrap();
}

fn identity_model() -> EspcnModel {
    let layer = Layer {
        kernel: ConvKernel::identity(1),
        activation: Activation::Identity,
    };
    EspcnModel::new(vec![layer], 1, 1).unwrap()
}

fn save_random_model(dir: &Path, name: &str, r: usize) -> PathBuf {
    let path = dir.join(name);
    let m = EspcnModel::init(&Architecture::espcn(r, 1, Activation::Tanh), 4).unwrap();
    save_model(&m, &path).unwrap();
    path
}

fn toy_config(dir: &Path) -> PathBuf {
    let data = dir.join("train");
    fs::create_dir_all(&data).unwrap();
    write_gray(&data.join("a.pgm"), &textured(51, 51, 0.4));
    let cfg = dir.join("run.cfg");
    fs::write(&cfg, "# toy run\ntrain_dir = train\nmodel_out = model.bin\nscale = 3\nmax_epochs = 5\nseed = 11\n")
        .unwrap();
    cfg
}

#[test]
fn missing_config_exits_2_naming_path() {
    let o = espcn(&["train", "/no/such/dir/run.cfg"]);
    assert_eq!(o.status.code(), Some(2));
    let msg = stderr(&o);
    assert!(msg.contains("/no/such/dir/run.cfg"), "{msg}");
    assert_eq!(msg.trim().lines().count(), 1);
}

#[test]
fn unknown_config_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = toy_config(dir.path());
    let text = fs::read_to_string(&cfg).unwrap() + "learning_rate = 0.1\n";
    fs::write(&cfg, text).unwrap();
    assert_eq!(espcn(&["train", path_str(&cfg)]).status.code(), Some(2));
}

#[test]
fn empty_training_directory_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = toy_config(dir.path());
    fs::remove_file(dir.path().join("train/a.pgm")).unwrap();
    let o = espcn(&["train", path_str(&cfg)]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn divergence_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = toy_config(dir.path());
    let text = fs::read_to_string(&cfg).unwrap() + "initial_lr = 1e200\nmomentum = 0\n";
    fs::write(&cfg, text).unwrap();
    let o = espcn(&["train", path_str(&cfg)]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}

#[test]
fn toy_training_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = toy_config(dir.path());
    let o = espcn(&["train", path_str(&cfg)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert_eq!(stdout.lines().filter(|l| l.starts_with("epoch")).count(), 5);

    let model = load_model(dir.path().join("model.bin")).unwrap();
    assert_eq!(model.upscale_ratio(), 3);
    let first = fs::read(dir.path().join("model.bin")).unwrap();
    let history = fs::read(dir.path().join("model.history.csv")).unwrap();

    let other = dir.path().join("again.bin");
    let o = espcn(&["train", path_str(&cfg), "--out", path_str(&other)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read(&other).unwrap(), first);
    assert_eq!(fs::read(dir.path().join("again.history.csv")).unwrap(), history);

    let reseeded = dir.path().join("seed.bin");
    let o = espcn(&["train", path_str(&cfg), "--seed", "12", "--out", path_str(&reseeded)]);
    assert!(o.status.success());
    assert_ne!(fs::read(&reseeded).unwrap(), first);
}

#[test]
fn hr_space_training_writes_ratio_one_model() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = toy_config(dir.path());
    let text = fs::read_to_string(&cfg).unwrap().replace("max_epochs = 5", "max_epochs = 1")
        + "pipeline = hr-space-9-5-5\n";
    fs::write(&cfg, text).unwrap();
    let o = espcn(&["train", path_str(&cfg)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let m = load_model(dir.path().join("model.bin")).unwrap();
    assert_eq!((m.upscale_ratio(), m.filter_sizes()), (1, vec![9, 5, 5]));
}

#[test]
fn sr_gray_shape() {
    let dir = tempfile::tempdir().unwrap();
    let model = save_random_model(dir.path(), "m.bin", 3);
    let input = dir.path().join("in.pgm");
    write_gray(&input, &textured(17, 17, 0.0));
    let out = dir.path().join("out.pgm");
    let o = espcn(&["sr", path_str(&input), "--model", path_str(&model), "--out", path_str(&out), "--scale", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    match decode_pnm(&fs::read(&out).unwrap()).unwrap() {
        Image::Gray(p) => assert_eq!((p.height(), p.width()), (51, 51)),
        Image::Rgb(_) => panic!("expected grayscale output"),
    }
}

#[test]
fn sr_identity_model_reproduces_input() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("id.bin");
    save_model(&identity_model(), &model).unwrap();
    let out = dir.path().join("out.pgm");
    let input = fixture("gradient.pgm");
    let o = espcn(&["sr", path_str(&input), "--model", path_str(&model), "--out", path_str(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read(&out).unwrap(), fs::read(&input).unwrap());
}

#[test]
fn sr_colour_shape() {
    let dir = tempfile::tempdir().unwrap();
    let model = save_random_model(dir.path(), "m.bin", 2);
    let input = dir.path().join("in.ppm");
    let samples = (0..32 * 32 * 3).map(|i| (i * 7 % 256) as u8).collect();
    fs::write(&input, encode_pnm(&Image::Rgb(RgbImage::new(32, 32, samples).unwrap()))).unwrap();
    let out = dir.path().join("out.ppm");
    let o = espcn(&["sr", path_str(&input), "--model", path_str(&model), "--out", path_str(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    match decode_pnm(&fs::read(&out).unwrap()).unwrap() {
        Image::Rgb(img) => assert_eq!((img.height(), img.width()), (64, 64)),
        Image::Gray(_) => panic!("expected colour output"),
    }
}

#[test]
fn sr_scale_mismatch_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let model = save_random_model(dir.path(), "m.bin", 3);
    let out = dir.path().join("out.pgm");
    let input = fixture("gradient.pgm");
    let o = espcn(&["sr", path_str(&input), "--model", path_str(&model), "--out", path_str(&out), "--scale", "2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn sr_corrupt_input_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let model = save_random_model(dir.path(), "m.bin", 2);
    let input = dir.path().join("bad.pgm");
    fs::write(&input, b"P5\n4 4\n255\n\x00\x01").unwrap();
    let out = dir.path().join("out.pgm");
    let o = espcn(&["sr", path_str(&input), "--model", path_str(&model), "--out", path_str(&out)]);
    assert_eq!(o.status.code(), Some(3));
}

fn synthetic_y4m(path: &Path, w: usize, h: usize, frames: usize) {
    let mut s = format!("YUV4MPEG2 W{w} H{h} F30:1 C420\n").into_bytes();
    for f in 0..frames {
        s.extend_from_slice(b"FRAME\n");
        s.extend((0..w * h).map(|i| ((i * 3 + f * 17) % 256) as u8));
        s.extend((0..w * h / 2).map(|i| ((i + 90 + f) % 256) as u8));
    }
    fs::write(path, s).unwrap();
}

#[test]
fn video_upscales_every_frame() {
    let dir = tempfile::tempdir().unwrap();
    let model = save_random_model(dir.path(), "m.bin", 2);
    let input = dir.path().join("in.y4m");
    synthetic_y4m(&input, 32, 32, 2);
    let out = dir.path().join("out.y4m");
    let o = espcn(&["video", path_str(&input), "--model", path_str(&model), "--out", path_str(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8(o.stdout).unwrap().contains("2 frames"));
    let bytes = fs::read(&out).unwrap();
    let reader = Y4mReader::new(&bytes[..]).unwrap();
    assert_eq!(reader.header(), &Y4mHeader::parse("YUV4MPEG2 W64 H64 F30:1 C420").unwrap());
    let frames: Vec<_> = reader.collect::<Result<_, _>>().unwrap();
    assert_eq!(frames.len(), 2);
    assert!(frames.iter().all(|f| f.y.len() == 64 * 64 && f.cb.len() == 32 * 32));
}

#[test]
fn video_identity_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("id.bin");
    save_model(&identity_model(), &model).unwrap();
    let out = dir.path().join("out.y4m");
    let input = fixture("clip.y4m");
    let o = espcn(&["video", path_str(&input), "--model", path_str(&model), "--out", path_str(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (a, b) = (fs::read(&input).unwrap(), fs::read(&out).unwrap());
    assert_eq!(a.len(), b.len());
    assert!(a.iter().zip(&b).all(|(x, y)| x.abs_diff(*y) <= 1));
}

#[test]
fn video_rejects_unsupported_chroma() {
    let dir = tempfile::tempdir().unwrap();
    let model = save_random_model(dir.path(), "m.bin", 2);
    let input = dir.path().join("in.y4m");
    fs::write(&input, b"YUV4MPEG2 W4 H4 F30:1 C444\n").unwrap();
    let out = dir.path().join("out.y4m");
    let o = espcn(&["video", path_str(&input), "--model", path_str(&model), "--out", path_str(&out)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("444"));
}

fn eval_dir(dir: &Path) -> PathBuf {
    let images = dir.join("images");
    fs::create_dir_all(&images).unwrap();
    for (i, phase) in [0.1, 0.9, 1.7].into_iter().enumerate() {
        write_gray(&images.join(format!("img{i}.pgm")), &textured(30, 33, phase));
    }
    images
}

#[test]
fn eval_rows_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let images = eval_dir(dir.path());
    let model = save_random_model(dir.path(), "m.bin", 3);
    let args = ["eval", path_str(&images), "--model", path_str(&model), "--methods", "espcn,bicubic"];
    let first = espcn(&args);
    assert!(first.status.success(), "{}", stderr(&first));
    let csv = String::from_utf8(first.stdout.clone()).unwrap();
    let rows: Vec<&str> = csv.lines().take_while(|l| !l.is_empty()).collect();
    assert_eq!(rows[0], "image,method,scale,psnr_db");
    assert_eq!(rows.len(), 1 + 3 * 2);
    assert!(csv.contains("\ncomparison,mean_diff_db,t,p_value,note\n"));
    assert_eq!(espcn(&args).stdout, first.stdout);
}

#[test]
fn eval_empty_directory_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let o = espcn(&["eval", path_str(dir.path()), "--scale", "3"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn eval_needs_scale_or_model() {
    let dir = tempfile::tempdir().unwrap();
    let images = eval_dir(dir.path());
    assert_eq!(espcn(&["eval", path_str(&images)]).status.code(), Some(2));
    let out = dir.path().join("report.csv");
    let o = espcn(&["eval", path_str(&images), "--scale", "3", "--out", path_str(&out)]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    assert_eq!(fs::read_to_string(&out).unwrap().lines().take_while(|l| !l.is_empty()).count(), 4);
}

#[test]
fn bench_rows_per_pipeline_and_size() {
    let o = espcn(&["bench", "--sizes", "12x10,8x8", "--reps", "3", "--warmup", "0"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "pipeline,height,width,scale,rep,seconds");
    assert_eq!(lines.len(), 1 + 3 * 2 * 2);
    for prefix in ["espcn-lr-space,10,12,3,", "hr-space-9-5-5,10,12,3,", "espcn-lr-space,8,8,3,", "hr-space-9-5-5,8,8,3,"] {
        assert_eq!(lines.iter().filter(|l| l.starts_with(prefix)).count(), 3, "{prefix}");
    }
    assert_eq!(espcn(&["bench", "--sizes", "8x8", "--reps", "2"]).status.code(), Some(2));
}

#[test]
fn dump_filters_layouts() {
    let dir = tempfile::tempdir().unwrap();
    let model = save_random_model(dir.path(), "m.bin", 3);
    let out = dir.path().join("f.pgm");
    let dims = |args: &[&str]| {
        let o = espcn(args);
        assert!(o.status.success(), "{}", stderr(&o));
        let img = decode_pnm(&fs::read(&out).unwrap()).unwrap();
        (img.height(), img.width())
    };
    let (m, o) = (path_str(&model), path_str(&out));
    assert_eq!(dims(&["dump-filters", "--model", m, "--layer", "1", "--out", o]), (47, 47));
    // 32 tiles of 9x9: 6 columns, 6 rows.
    assert_eq!(dims(&["dump-filters", "--model", m, "--layer", "3", "--out", o, "--shuffled"]), (59, 59));
    assert_eq!(espcn(&["dump-filters", "--model", m, "--layer", "4", "--out", o]).status.code(), Some(2));
    assert_eq!(espcn(&["dump-filters", "--model", m, "--layer", "1", "--out", o, "--shuffled"]).status.code(), Some(2));
}
