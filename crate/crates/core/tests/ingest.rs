use chrono::NaiveDate;
use fls_core::ingest::{
    apply_splits, clean, forward_fill, inner_join, read_csv, read_split_file, to_log_returns,
    CsvSchema, IngestError, PriceTable,
};
use fls_core::synth::weekdays;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn table(prices: DMatrix<f64>) -> PriceTable {
    let start = NaiveDate::from_ymd_opt(2021, 3, 1).unwrap();
    let labels = (0..prices.ncols())
        .map(|j| if j == 0 { "IDX".to_string() } else { format!("A{j}") })
        .collect();
    PriceTable::new(weekdays(start, prices.nrows()), labels, prices)
}

fn prices_strategy(max_rows: usize, max_cols: usize) -> impl Strategy<Value = DMatrix<f64>> {
    (2..=max_rows, 2..=max_cols).prop_flat_map(|(n, m)| {
        prop::collection::vec(0.01f64..1e5, n * m).prop_map(move |v| DMatrix::from_vec(n, m, v))
    })
}

#[test]
fn split_file_removes_jump() {
    let prices = DMatrix::from_row_slice(4, 2, &[100.0, 50.0, 101.0, 52.0, 102.0, 26.5, 103.0, 27.0]);
    let t = table(prices);
    let split_day = t.dates[2];
    let file = format!("date,stream,factor\n{},A1,0.5\n", split_day.format("%Y-%m-%d"));
    let events = read_split_file(file.as_bytes()).unwrap();
    let adj = apply_splits(&t, &events).unwrap();
    assert_eq!(adj.prices[(0, 1)], 25.0);
    assert_eq!(adj.prices[(1, 1)], 26.0);
    assert_eq!(adj.prices[(2, 1)], 26.5);
    let r = to_log_returns(&adj).unwrap();
    assert!((r.explanatory[(1, 0)] - (26.5f64 / 26.0).ln()).abs() < 1e-15);
}

#[test]
fn split_on_unknown_stream_is_named() {
    let t = table(DMatrix::from_element(3, 2, 1.0));
    let events = read_split_file("date,stream,factor\n2021-03-02,ZZZ,2\n".as_bytes()).unwrap();
    match apply_splits(&t, &events) {
        Err(IngestError::UnknownStream(s)) => assert_eq!(s, "ZZZ"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn join_keeps_common_dates() {
    let a = read_csv(
        "date,IDX\n2020-01-01,1\n2020-01-02,2\n2020-01-03,3\n".as_bytes(),
        &CsvSchema::target("IDX"),
    )
    .unwrap();
    let b = read_csv(
        "date,X\n2020-01-02,20\n2020-01-03,30\n2020-01-04,40\n".as_bytes(),
        &CsvSchema::target("X"),
    )
    .unwrap();
    let j = inner_join(&[a, b]).unwrap();
    assert_eq!(j.labels, vec!["IDX", "X"]);
    assert_eq!(j.rows(), 2);
    assert_eq!(j.prices[(0, 0)], 2.0);
    assert_eq!(j.prices[(1, 1)], 30.0);
}

#[test]
fn clean_drops_sparse_and_fills() {
    let csv = "date,IDX,A,B\n\
               2020-01-01,100,10,20\n\
               2020-01-02,101,,\n\
               2020-01-03,102,11,\n\
               2020-01-06,103,12,\n";
    let t = read_csv(csv.as_bytes(), &CsvSchema::target("IDX")).unwrap();
    let (c, dropped) = clean(&t, 0.3).unwrap();
    assert_eq!(dropped, vec!["B"]);
    assert_eq!(c.labels, vec!["IDX", "A"]);
    assert_eq!(c.prices[(1, 1)], 10.0);
    assert!(!c.has_holes());
}

proptest! {
    #[test]
    fn csv_round_trip(prices in prices_strategy(30, 6)) {
        let t = table(prices);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let back = read_csv(buf.as_slice(), &CsvSchema::target("IDX")).unwrap();
        prop_assert_eq!(&back.dates, &t.dates);
        prop_assert_eq!(&back.labels, &t.labels);
        for (a, b) in back.prices.iter().zip(t.prices.iter()) {
            prop_assert!((a - b).abs() <= 1e-12 * b.abs());
        }
    }

    #[test]
    fn returns_ignore_price_scale(prices in prices_strategy(30, 5), c in 1e-3f64..1e3, col in 0usize..5) {
        let t = table(prices);
        let col = col % t.prices.ncols();
        let mut scaled = t.clone();
        scaled.prices.column_mut(col).scale_mut(c);
        let a = to_log_returns(&t).unwrap();
        let b = to_log_returns(&scaled).unwrap();
        prop_assert!((a.target - b.target).amax() <= 1e-12 * 30.0);
        prop_assert!((a.explanatory - b.explanatory).amax() <= 1e-12 * 30.0);
    }

    #[test]
    fn forward_fill_idempotent(prices in prices_strategy(25, 4), holes in prop::collection::vec(any::<bool>(), 100)) {
        let mut t = table(prices);
        let (n, m) = t.prices.shape();
        for i in 1..n {
            for j in 0..m {
                if holes[(i * m + j) % holes.len()] {
                    t.prices[(i, j)] = f64::NAN;
                }
            }
        }
        let once = forward_fill(&t).unwrap();
        prop_assert!(!once.has_holes());
        prop_assert_eq!(forward_fill(&once).unwrap(), once);
    }
}
