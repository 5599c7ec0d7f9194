use std::io::{Read, Write};

use super::HomeRecord;
use crate::error::{Error, Result};

fn data_err(e: impl std::fmt::Display) -> Error {
    Error::Data(e.to_string())
}

/// Write homes as `home_id, f_1..f_d, true_value, sale_price`; a missing sale price is an empty field.
pub fn write_training_csv<W: Write>(homes: &[HomeRecord], out: W) -> Result<()> {
    let dim = homes.first().map_or(0, |h| h.features.len());
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["home_id".to_string()];
    header.extend((1..=dim).map(|j| format!("f_{j}")));
    header.extend(["true_value".to_string(), "sale_price".to_string()]);
    w.write_record(&header).map_err(data_err)?;
    for h in homes {
        if h.features.len() != dim {
            return Err(Error::Data("feature dimension differs across homes".into()));
        }
        let mut row = vec![h.home_id.to_string()];
        row.extend(h.features.iter().map(f64::to_string));
        row.push(h.true_value.to_string());
        row.push(h.last_sale_price.map(|p| p.to_string()).unwrap_or_default());
        w.write_record(&row).map_err(data_err)?;
    }
    w.flush().map_err(data_err)
}

/// Read homes written by [`write_training_csv`].
pub fn read_training_csv<R: Read>(input: R) -> Result<Vec<HomeRecord>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(data_err)?.clone();
    let cols: Vec<&str> = header.iter().collect();
    let dim = cols.len().checked_sub(3).ok_or_else(|| data_err("too few columns"))?;
    let expected: Vec<String> = std::iter::once("home_id".to_string())
        .chain((1..=dim).map(|j| format!("f_{j}")))
        .chain(["true_value".to_string(), "sale_price".to_string()])
        .collect();
    if cols != expected.iter().map(String::as_str).collect::<Vec<_>>() {
        return Err(data_err(format!("unexpected header {cols:?}")));
    }
    let num = |s: &str| s.parse::<f64>().map_err(|e| data_err(format!("{s:?}: {e}")));
    let mut homes = Vec::new();
    for row in r.records() {
        let row = row.map_err(data_err)?;
        let id = row[0].parse::<u64>().map_err(|e| data_err(format!("home_id {:?}: {e}", &row[0])))?;
        let features = (1..=dim).map(|j| num(&row[j])).collect::<Result<Vec<_>>>()?;
        let value = num(&row[dim + 1])?;
        let sale = match &row[dim + 2] {
            "" => None,
            s => Some(num(s)?),
        };
        homes.push(HomeRecord::new(id, features, value, sale));
    }
    Ok(homes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let homes = vec![
            HomeRecord::new(1, vec![0.5, -1.25], 101.5, Some(99.0)),
            HomeRecord::new(7, vec![1e-9, 3.0], 88.0, None),
        ];
        let mut buf = Vec::new();
        write_training_csv(&homes, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("home_id,f_1,f_2,true_value,sale_price\n"));
        assert_eq!(read_training_csv(buf.as_slice()).unwrap(), homes);
    }

    #[test]
    fn rejects_bad_header() {
        assert!(read_training_csv("id,x,true_value,sale_price\n1,2,3,4\n".as_bytes()).is_err());
    }
}
