use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use orientkit::augment::{write_image, Channels, RasterImage};
use orientkit::dataio::{
    write_annotations, AnnotatedFingerphoto, Finger, FingerLabel, Hand, Provenance,
};
use orientkit::OrientedBox;
use orientkit_cli::evaluate::{summarize, DetailRow, EvaluationSummary};

fn orientkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_orientkit"))
        .args(args)
        .env_remove("ORIENTKIT_JOBS")
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn s(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

fn photo(i: usize, boxes: &[OrientedBox]) -> AnnotatedFingerphoto {
    let labels = [
        FingerLabel::LeftIndex,
        FingerLabel::LeftMiddle,
        FingerLabel::LeftRing,
        FingerLabel::LeftLittle,
    ];
    AnnotatedFingerphoto {
        image: format!("p{i}.pgm"),
        width: 800,
        height: 600,
        hand: Hand::Left,
        fingers: boxes
            .iter()
            .zip(labels)
            .map(|(&bbox, label)| Finger { label, bbox })
            .collect(),
        provenance: Provenance::Bonafide,
        source_id: format!("p{i}"),
        augment_angle: 0.0,
    }
}

fn gt_set() -> Vec<AnnotatedFingerphoto> {
    (0..6)
        .map(|i| {
            let boxes: Vec<OrientedBox> = (0..3)
                .map(|k| {
                    OrientedBox::from_degrees(
                        120.0 + 200.0 * k as f64,
                        300.0 + 10.0 * i as f64,
                        90.0,
                        140.0,
                        -40.0 + 12.0 * (i + k) as f64,
                    )
                    .unwrap()
                })
                .collect();
            photo(i, &boxes)
        })
        .collect()
}

fn map_boxes(
    records: &[AnnotatedFingerphoto],
    f: impl Fn(&OrientedBox) -> OrientedBox,
) -> Vec<AnnotatedFingerphoto> {
    records
        .iter()
        .map(|r| {
            let mut r = r.clone();
            for finger in &mut r.fingers {
                finger.bbox = f(&finger.bbox);
            }
            r
        })
        .collect()
}

fn evaluate(
    dir: &Path,
    gt: &[AnnotatedFingerphoto],
    pred: &[AnnotatedFingerphoto],
) -> (Output, EvaluationSummary) {
    let (g, p, out) = (
        dir.join("gt.jsonl"),
        dir.join("pred.jsonl"),
        dir.join("eval"),
    );
    write_annotations(&g, gt).unwrap();
    write_annotations(&p, pred).unwrap();
    let o = orientkit(&[
        "evaluate",
        "--gt",
        &s(&g),
        "--pred",
        &s(&p),
        "--out",
        &s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary = serde_json::from_slice(&fs::read(out.join("report.json")).unwrap()).unwrap();
    (o, summary)
}

#[test]
fn help_and_usage_errors() {
    assert_eq!(code(&orientkit(&["--help"])), 0);
    assert_eq!(code(&orientkit(&["--version"])), 0);
    assert_eq!(code(&orientkit(&["frobnicate"])), 3);
    assert_eq!(code(&orientkit(&["anchors"])), 3);
    assert_eq!(code(&orientkit(&["anchors", "--grid", "3by4"])), 3);
    assert_eq!(
        code(&orientkit(&["--jobs", "0", "anchors", "--grid", "1x1"])),
        3
    );
}

#[test]
fn missing_input_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let missing = s(&dir.path().join("nope.jsonl"));
    let out = s(&dir.path().join("out"));
    assert_eq!(
        code(&orientkit(&[
            "split",
            "--annotations",
            &missing,
            "--out",
            &out
        ])),
        2
    );
    assert_eq!(
        code(&orientkit(&["roc", "--scores", &missing, "--out", &out])),
        2
    );
}

#[test]
fn malformed_annotations_are_input_errors() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.jsonl");
    fs::write(&bad, "{not json}\n").unwrap();
    let o = orientkit(&[
        "split",
        "--annotations",
        &s(&bad),
        "--out",
        &s(&dir.path().join("o")),
    ]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 1"));
}

#[test]
fn anchors_counts_and_config() {
    assert!(stdout(&orientkit(&["anchors", "--grid", "1x1"])).starts_with("anchors=63\n"));
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("a.csv");
    let o = orientkit(&[
        "anchors",
        "--grid",
        "2x3",
        "--stride",
        "8",
        "--out",
        &s(&csv),
    ]);
    assert_eq!(stdout(&o), "anchors=378\n");
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 1 + 378);
    assert!(text.starts_with("cx,cy,w,h,theta_deg\n4,4,128,128,-45\n"));

    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"orientations_deg": [0, 90], "scales": [16]}"#).unwrap();
    let o = orientkit(&[
        "anchors",
        "--grid",
        "2x2",
        "--config",
        &s(&cfg),
        "--out",
        &s(&csv),
    ]);
    assert_eq!(stdout(&o), "anchors=24\n");
    fs::write(&cfg, r#"{"scales": []}"#).unwrap();
    assert_eq!(
        code(&orientkit(&[
            "anchors",
            "--grid",
            "2x2",
            "--config",
            &s(&cfg)
        ])),
        3
    );
}

#[test]
fn roc_reports_tar_at_far() {
    let dir = tempfile::tempdir().unwrap();
    let scores = dir.path().join("scores.csv");
    let mut text = String::from("probe_id,gallery_id,score,mated\n");
    for i in 0..50 {
        text.push_str(&format!("p{i},g{i},{},1\n", 0.9 + i as f64 / 1000.0));
        for j in 0..20 {
            text.push_str(&format!("p{i},g{j}x,{},0\n", (i * 20 + j) as f64 / 2000.0));
        }
    }
    fs::write(&scores, &text).unwrap();
    let out = dir.path().join("roc");
    let o = orientkit(&["roc", "--scores", &s(&scores), "--out", &s(&out), "--plots"]);
    assert_eq!(code(&o), 0);
    assert!(
        stdout(&o).contains("TAR@FAR0.001 = 1.0000"),
        "{}",
        stdout(&o)
    );
    assert!(out.join("roc.svg").is_file());
    let roc = fs::read_to_string(out.join("roc.csv")).unwrap();
    assert!(roc.starts_with("threshold,tar,far\n"));
    assert_eq!(roc.lines().count(), 1 + 50 + 1000);

    fs::write(&scores, "probe_id,gallery_id,score,mated\na,b,0.5,1\n").unwrap();
    assert_eq!(
        code(&orientkit(&[
            "roc",
            "--scores",
            &s(&scores),
            "--out",
            &s(&out)
        ])),
        3
    );
    fs::write(&scores, "probe_id,gallery_id,score,mated\na,b,0.5,7\n").unwrap();
    assert_eq!(
        code(&orientkit(&[
            "roc",
            "--scores",
            &s(&scores),
            "--out",
            &s(&out)
        ])),
        3
    );
}

#[test]
fn augment_counts_and_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let images = dir.path().join("images");
    fs::create_dir(&images).unwrap();
    let mut records = Vec::new();
    for i in 0..3 {
        let mut r = photo(
            i,
            &[OrientedBox::from_degrees(4.0, 4.0, 3.0, 5.0, 0.0).unwrap()],
        );
        r.width = 8;
        r.height = 8;
        write_image(
            &images.join(&r.image),
            &RasterImage::filled(8, 8, Channels::Gray, 9),
        )
        .unwrap();
        records.push(r);
    }
    let ann = dir.path().join("ann.jsonl");
    write_annotations(&ann, &records).unwrap();

    let out = dir.path().join("aug");
    let o = orientkit(&[
        "augment",
        "--annotations",
        &s(&ann),
        "--images",
        &s(&images),
        "--out",
        &s(&out),
        "--angles",
        "-30,30",
    ]);
    assert_eq!(
        stdout(&o),
        "bonafide=3 augmented=6 total=9\n",
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert!(out.join("p0.pgm").is_file());
    assert!(out.join("p2_rot-30.pgm").is_file());
    let listed = orientkit::dataio::parse_annotations(&out.join("annotations.jsonl")).unwrap();
    assert_eq!(listed.len(), 9);

    let out = dir.path().join("aug_default");
    let o = orientkit(&[
        "augment",
        "--annotations",
        &s(&ann),
        "--images",
        &s(&images),
        "--out",
        &s(&out),
    ]);
    assert_eq!(stdout(&o), "bonafide=3 augmented=30 total=33\n");

    // Augmented inputs and out-of-range angles are rejected.
    let o = orientkit(&[
        "augment",
        "--annotations",
        &s(&out.join("annotations.jsonl")),
        "--images",
        &s(&out),
        "--out",
        &s(&dir.path().join("x")),
    ]);
    assert_eq!(code(&o), 3);
    let o = orientkit(&[
        "augment",
        "--annotations",
        &s(&ann),
        "--images",
        &s(&images),
        "--out",
        &s(&dir.path().join("y")),
        "--angles",
        "120",
    ]);
    assert_eq!(code(&o), 3);
}

#[test]
fn split_and_kfold_files() {
    let dir = tempfile::tempdir().unwrap();
    let ann = dir.path().join("ann.jsonl");
    write_annotations(
        &ann,
        &(0..20)
            .map(|i| photo(i, &[OrientedBox::new(50.0, 50.0, 20.0, 30.0, 0.0).unwrap()]))
            .collect::<Vec<_>>(),
    )
    .unwrap();
    let out = dir.path().join("split");
    let o = orientkit(&[
        "split",
        "--annotations",
        &s(&ann),
        "--seed",
        "5",
        "--out",
        &s(&out),
    ]);
    assert_eq!(stdout(&o), "train=16 validation=2 test=2\n");
    let lines = |f: &str| fs::read_to_string(out.join(f)).unwrap().lines().count();
    assert_eq!(
        (
            lines("train.txt"),
            lines("validation.txt"),
            lines("test.txt")
        ),
        (16, 2, 2)
    );
    assert_eq!(
        code(&orientkit(&[
            "split",
            "--annotations",
            &s(&ann),
            "--ratios",
            "0.5,0.5",
            "--out",
            &s(&out)
        ])),
        3
    );

    let folds = dir.path().join("folds");
    let o = orientkit(&[
        "kfold",
        "--annotations",
        &s(&ann),
        "--k",
        "4",
        "--out",
        &s(&folds),
    ]);
    assert_eq!(stdout(&o), "folds=4 test_sizes=5,5,5,5\n");
    assert!(folds.join("fold_04_test.txt").is_file());
    assert_eq!(
        code(&orientkit(&[
            "kfold",
            "--annotations",
            &s(&ann),
            "--k",
            "30",
            "--out",
            &s(&folds)
        ])),
        3
    );
}

#[test]
fn inflated_predictions_give_mae_five() {
    let dir = tempfile::tempdir().unwrap();
    let gt = gt_set();
    let pred = map_boxes(&gt, |b| {
        OrientedBox::new(b.cx(), b.cy(), b.w() + 10.0, b.h() + 10.0, b.theta()).unwrap()
    });
    let (_, summary) = evaluate(dir.path(), &gt, &pred);
    for side in [
        summary.mae.left,
        summary.mae.right,
        summary.mae.top,
        summary.mae.bottom,
    ] {
        assert!(
            (side.mae - 5.0).abs() < 1e-9 && side.std.abs() < 1e-9,
            "{side:?}"
        );
    }
    assert_eq!(summary.nist_pass_rate, 1.0);
    assert_eq!(summary.label_accuracy, 1.0);
}

#[test]
fn rotated_predictions_give_eap_seven() {
    let dir = tempfile::tempdir().unwrap();
    let gt = gt_set();
    let pred = map_boxes(&gt, |b| b.rotated_about(b.center(), 7f64.to_radians()));
    let (_, summary) = evaluate(dir.path(), &gt, &pred);
    assert!((summary.eap_mean_deg - 7.0).abs() < 1e-9);
    assert!(summary.eap_std_deg.abs() < 1e-9);
}

#[test]
fn report_agrees_with_details() {
    let dir = tempfile::tempdir().unwrap();
    let gt = gt_set();
    let mut pred = map_boxes(&gt, |b| {
        OrientedBox::new(
            b.cx() + 3.0,
            b.cy() - 2.0,
            b.w() * 1.1,
            b.h() * 0.95,
            b.theta() + 0.05,
        )
        .unwrap()
    });
    pred[1].fingers[0].label = FingerLabel::LeftThumb;
    pred[2].fingers.pop();
    let (o, summary) = evaluate(dir.path(), &gt, &pred);
    assert!(stdout(&o).contains("unmatched=1"));

    let mut reader = csv::Reader::from_path(dir.path().join("eval/details.csv")).unwrap();
    let rows: Vec<DetailRow> = reader.deserialize().collect::<Result<_, _>>().unwrap();
    assert_eq!(rows.len(), 18);
    let again = summarize(&rows, summary.tolerance_px).unwrap();
    let pairs = [
        (again.mae.left.mae, summary.mae.left.mae),
        (again.mae.right.mae, summary.mae.right.mae),
        (again.mae.top.mae, summary.mae.top.mae),
        (again.mae.bottom.mae, summary.mae.bottom.mae),
        (again.mae.left.std, summary.mae.left.std),
        (again.eap_mean_deg, summary.eap_mean_deg),
        (again.eap_std_deg, summary.eap_std_deg),
        (again.label_accuracy, summary.label_accuracy),
        (again.nist_pass_rate, summary.nist_pass_rate),
    ];
    for (a, b) in pairs {
        assert!((a - b).abs() <= 1e-9, "{a} vs {b}");
    }
    // Six images of three slots; two slots wrong in two different images.
    assert!((summary.label_accuracy - (1.0 - 2.0 / 3.0 / 6.0)).abs() < 1e-12);
}

#[test]
fn evaluate_rejects_mismatched_files() {
    let dir = tempfile::tempdir().unwrap();
    let gt = gt_set();
    let (g, p) = (dir.path().join("gt.jsonl"), dir.path().join("pred.jsonl"));
    write_annotations(&g, &gt).unwrap();
    write_annotations(&p, &gt[..5]).unwrap();
    let o = orientkit(&[
        "evaluate",
        "--gt",
        &s(&g),
        "--pred",
        &s(&p),
        "--out",
        &s(&dir.path().join("e")),
    ]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("p5.pgm"));
}

#[test]
fn plots_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let gt = gt_set();
    let (g, out) = (dir.path().join("gt.jsonl"), dir.path().join("eval"));
    write_annotations(&g, &gt).unwrap();
    let o = orientkit(&[
        "evaluate",
        "--gt",
        &s(&g),
        "--pred",
        &s(&g),
        "--out",
        &s(&out),
        "--plots",
    ]);
    assert_eq!(code(&o), 0);
    for f in [
        "hist_left_error.svg",
        "hist_right_error.svg",
        "hist_top_error.svg",
        "hist_bottom_error.svg",
        "hist_angle_error.svg",
        "boxplot_eap.svg",
    ] {
        assert!(
            fs::read_to_string(out.join(f)).unwrap().contains("</svg>"),
            "{f}"
        );
    }
}
