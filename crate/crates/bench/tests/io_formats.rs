use std::fs;

use streamsketch_bench::io::{
    parse_csv, parse_fvecs, read_csv, read_fvecs, write_csv, write_fvecs, DataError,
};

fn record(coords: &[f32]) -> Vec<u8> {
    let mut out = (coords.len() as i32).to_le_bytes().to_vec();
    for c in coords {
        out.extend_from_slice(&c.to_le_bytes());
    }
    out
}

#[test]
fn fvecs_single_record() {
    let buf = record(&[1.0, 2.0]);
    assert_eq!(buf.len(), 12);
    let pts = parse_fvecs(&buf).unwrap();
    assert_eq!(pts.len(), 1);
    assert_eq!(pts[0].as_slice(), &[1.0, 2.0]);
}

#[test]
fn fvecs_empty_file_has_no_points() {
    assert!(parse_fvecs(&[]).unwrap().is_empty());
}

#[test]
fn fvecs_trailing_byte_reports_its_offset() {
    let mut buf = record(&[1.0, 2.0]);
    buf.push(0);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.fvecs");
    fs::write(&path, &buf).unwrap();
    match read_fvecs(&path) {
        Err(DataError::Binary { offset, .. }) => assert_eq!(offset, 12),
        other => panic!("expected a binary error, got {other:?}"),
    }
}

#[test]
fn fvecs_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.fvecs");
    let pts = vec![vec![0.5f32, -1.25, 3.0], vec![1e-7, 0.0, -0.0]];
    write_fvecs(&path, &pts).unwrap();
    let back: Vec<Vec<f32>> = read_fvecs(&path)
        .unwrap()
        .into_iter()
        .map(|p| p.into_vec())
        .collect();
    assert_eq!(back, pts);
}

#[test]
fn csv_accepts_exponents() {
    let pts = parse_csv("1e-3,2\n-4.5,0\n".as_bytes()).unwrap();
    assert_eq!(pts[0].as_slice(), &[1e-3, 2.0]);
    assert_eq!(pts[1].as_slice(), &[-4.5, 0.0]);
}

#[test]
fn csv_ragged_row_reports_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    fs::write(&path, "1,2,3\n4,5\n").unwrap();
    match read_csv(&path) {
        Err(DataError::Text { line, .. }) => assert_eq!(line, 2),
        other => panic!("expected a text error, got {other:?}"),
    }
}

#[test]
fn csv_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.csv");
    let pts = vec![vec![0.1f32, 2.5e-8], vec![-3.0, 7.75]];
    write_csv(&path, &pts).unwrap();
    let back: Vec<Vec<f32>> = read_csv(&path)
        .unwrap()
        .into_iter()
        .map(|p| p.into_vec())
        .collect();
    assert_eq!(back, pts);
}
