use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn latprobe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_latprobe"))
        .args(args)
        .env_remove("LPT_THREADS")
        .output()
        .unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn count_tensors(dir: &Path) -> usize {
    fs::read_dir(dir)
        .unwrap()
        .filter(|e| {
            let name = e.as_ref().unwrap().file_name();
            let name = name.to_str().unwrap();
            name.ends_with(".lpt") && !name.ends_with(".lat.lpt")
        })
        .count()
}

#[test]
fn synth_counts_and_refusal() {
    let tmp = tempfile::tempdir().unwrap();
    let colors = tmp.path().join("colors");
    let out = latprobe(&[
        "synth",
        "colors",
        "--hues",
        "12",
        "--sats",
        "6",
        "--vals",
        "5",
        "--side",
        "16",
        "--out",
        p(&colors),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(count_tensors(&colors), 360);
    assert!(colors.join("manifest.json").is_file());

    let again = latprobe(&["synth", "colors", "--side", "16", "--out", p(&colors)]);
    assert_eq!(again.status.code(), Some(2));
    let forced = latprobe(&[
        "synth",
        "colors",
        "--side",
        "16",
        "--force",
        "--out",
        p(&colors),
    ]);
    assert!(forced.status.success());

    let shapes = tmp.path().join("shapes");
    assert!(latprobe(&[
        "synth",
        "shapes",
        "--side",
        "32",
        "--png",
        "--out",
        p(&shapes)
    ])
    .status
    .success());
    assert_eq!(count_tensors(&shapes), 80);
    assert_eq!(fs::read_dir(shapes.join("png")).unwrap().count(), 80);

    let wheel = tmp.path().join("wheel");
    assert!(latprobe(&[
        "synth",
        "wheel",
        "--value",
        "1.0",
        "--side",
        "16",
        "--out",
        p(&wheel)
    ])
    .status
    .success());
    assert_eq!(count_tensors(&wheel), 1);

    let bad = latprobe(&[
        "synth",
        "wheel",
        "--side",
        "12",
        "--out",
        p(&tmp.path().join("bad")),
    ]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn pca_reference_and_missing_external_latents() {
    let tmp = tempfile::tempdir().unwrap();
    let colors = tmp.path().join("colors");
    assert!(
        latprobe(&["synth", "colors", "--side", "16", "--out", p(&colors)])
            .status
            .success()
    );

    let out = tmp.path().join("pca");
    let run = latprobe(&["pca", "--dataset", p(&colors), "--out", p(&out)]);
    assert!(
        run.status.success(),
        "{}",
        String::from_utf8_lossy(&run.stderr)
    );
    let pca: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("pca.json")).unwrap()).unwrap();
    assert!(pca["explained"][3].as_f64().unwrap() <= 1e-9);
    let corr = fs::read_to_string(out.join("correlations.json")).unwrap();
    assert!(corr.contains("pearson_pc1_mean_intensity"));
    assert_eq!(
        fs::read_to_string(out.join("scatter.csv"))
            .unwrap()
            .lines()
            .count(),
        361
    );

    let ext = latprobe(&[
        "pca",
        "--codec",
        "external",
        "--dataset",
        p(&colors),
        "--out",
        p(&tmp.path().join("ext")),
    ]);
    assert_eq!(ext.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&ext.stderr);
    assert!(
        stderr.contains("color_h00_s0_v0") && stderr.contains("color_h11_s5_v4"),
        "{stderr}"
    );
}

#[test]
fn ablate_split_and_grid() {
    let tmp = tempfile::tempdir().unwrap();
    let shapes = tmp.path().join("shapes");
    assert!(
        latprobe(&["synth", "shapes", "--side", "32", "--out", p(&shapes)])
            .status
            .success()
    );
    let out = tmp.path().join("ablate");
    let run = latprobe(&[
        "--threads",
        "2",
        "ablate",
        "--dataset",
        p(&shapes),
        "--band",
        "split",
        "--out",
        p(&out),
    ]);
    assert!(
        run.status.success(),
        "{}",
        String::from_utf8_lossy(&run.stderr)
    );
    for band in ["low", "high"] {
        let md = fs::read_to_string(out.join(format!("table_{band}.md"))).unwrap();
        assert!(md.contains("(100.00%)") && md.contains("(0.00%)"));
        assert_eq!(
            fs::read_to_string(out.join(format!("table_{band}.csv")))
                .unwrap()
                .lines()
                .count(),
            17
        );
    }

    let image = shapes.join("shape_disc_s07_dark-on-light.lpt");
    let no_pca = latprobe(&[
        "grid",
        "--image",
        p(&image),
        "--pca",
        p(&tmp.path().join("none.json")),
        "--out",
        p(&tmp.path().join("g")),
    ]);
    assert_eq!(no_pca.status.code(), Some(2));

    let colors = tmp.path().join("colors");
    assert!(
        latprobe(&["synth", "colors", "--side", "16", "--out", p(&colors)])
            .status
            .success()
    );
    let pca = tmp.path().join("pca");
    assert!(
        latprobe(&["pca", "--dataset", p(&colors), "--out", p(&pca)])
            .status
            .success()
    );
    let grid = tmp.path().join("grid");
    let run = latprobe(&[
        "grid",
        "--image",
        p(&image),
        "--pca",
        p(&pca.join("pca.json")),
        "--out",
        p(&grid),
    ]);
    assert!(
        run.status.success(),
        "{}",
        String::from_utf8_lossy(&run.stderr)
    );
    assert_eq!(fs::read_dir(grid.join("grid")).unwrap().count(), 22);
    assert!(grid.join("mosaic.png").is_file());
}

#[test]
fn malformed_tensor_and_bad_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let shapes = tmp.path().join("shapes");
    assert!(
        latprobe(&["synth", "shapes", "--side", "16", "--out", p(&shapes)])
            .status
            .success()
    );
    fs::write(
        shapes.join("shape_disc_s00_dark-on-light.lpt"),
        b"LPT1garbage",
    )
    .unwrap();
    let run = latprobe(&[
        "ablate",
        "--dataset",
        p(&shapes),
        "--out",
        p(&tmp.path().join("a")),
    ]);
    assert_eq!(run.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&run.stderr).contains("shape_disc_s00_dark-on-light.lpt"));

    let bad_codec = latprobe(&[
        "pca",
        "--codec",
        "vae",
        "--dataset",
        p(&shapes),
        "--out",
        p(&tmp.path().join("b")),
    ]);
    assert_eq!(bad_codec.status.code(), Some(2));
    let no_out = latprobe(&["pca", "--dataset", p(&shapes)]);
    assert_eq!(no_out.status.code(), Some(2));
}

#[test]
fn threads_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let shapes = tmp.path().join("shapes");
    let run = Command::new(env!("CARGO_BIN_EXE_latprobe"))
        .args(["synth", "shapes", "--side", "16", "--out", p(&shapes)])
        .env("LPT_THREADS", "3")
        .output()
        .unwrap();
    assert!(run.status.success());
    let bad = Command::new(env!("CARGO_BIN_EXE_latprobe"))
        .args([
            "synth",
            "shapes",
            "--side",
            "16",
            "--out",
            p(&tmp.path().join("x")),
        ])
        .env("LPT_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}
