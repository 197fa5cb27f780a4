// SPDX-License-Identifier: MIT OR Apache-2.0

use maxem::data::CsvSchema;
use maxem::{read_csv, write_csv, Dataset, ResponseKind, Scenario, Segmentation};

#[test]
fn csv_round_trip() {
    for name in ["linear-1bp", "logistic-1bp", "aft-1bp", "mean-1bp"] {
        let data = Scenario::preset(name).unwrap().generate(1).unwrap().data;
        let mut buf = Vec::new();
        write_csv(&data, &mut buf).unwrap();
        let back: Dataset = read_csv(buf.as_slice(), &CsvSchema::positional(data.kind())).unwrap();
        assert_eq!(back.n(), data.n());
        assert_eq!(back.p(), data.p());
        assert_eq!(back.response(), data.response());
        assert_eq!(back.events(), data.events());
    }
}

#[test]
fn named_columns_in_any_order() {
    let text = "x2,y,x1\n1.0,3.5,0.5\n2.0,4.5,0.25\n";
    let ds: Dataset = read_csv(text.as_bytes(), &CsvSchema::named(ResponseKind::Continuous, "y", &["x1", "x2"])).unwrap();
    assert_eq!(ds.response(), &[3.5, 4.5]);
    assert_eq!(ds.row(1), &[0.25, 2.0]);
}

#[test]
fn censored_schema() {
    let text = "time,status,x1,x2\n1.5,1,0.1,0.2\n2.5,0,0.3,0.4\n";
    let ds: Dataset = read_csv(text.as_bytes(), &CsvSchema::censored("time", "status", &["x1", "x2"])).unwrap();
    assert_eq!(ds.events(), Some(&[true, false][..]));
}

#[test]
fn malformed_input_is_rejected() {
    let schema = CsvSchema::positional(ResponseKind::Binary);
    assert!(read_csv::<f64, _>("y\n0\n2\n".as_bytes(), &schema).is_err());
    assert!(read_csv::<f64, _>("y\n0\nabc\n".as_bytes(), &schema).is_err());
    let named = CsvSchema::named(ResponseKind::Continuous, "nope", &[]);
    assert!(read_csv::<f64, _>("y\n1\n2\n".as_bytes(), &named).is_err());
}

#[test]
fn segmentation_labels_round_trip() {
    let seg = Segmentation::new(10, vec![3, 7]).unwrap();
    assert_eq!(seg.labels(), vec![0, 0, 0, 1, 1, 1, 1, 2, 2, 2]);
    assert_eq!(Segmentation::from_labels(&seg.labels()).unwrap(), seg);
    assert!(Segmentation::new(10, vec![7, 3]).is_err());
    assert!(Segmentation::new(10, vec![10]).is_err());
    assert!(Segmentation::from_labels(&[0, 2, 2]).is_err());
}

#[test]
fn file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("aft.csv");
    let data = Scenario::preset("aft-2bp").unwrap().generate(3).unwrap().data;
    maxem::save_csv(&data, &path).unwrap();
    let back: Dataset = maxem::load_csv(&path, &CsvSchema::positional(ResponseKind::CensoredTime)).unwrap();
    assert_eq!(back.response(), data.response());
    assert_eq!(back.events(), data.events());
    assert_eq!(back.row(17), data.row(17));
}
