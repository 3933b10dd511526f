//! Library records as read from CSV, and their conversion to a DEA panel.
//!
//! Inputs: two-year total expenditures, employees, book collection at the
//! start of the period. Outputs: registrations, circulation, event
//! attendance, and collection additions (the positive part of the yearly
//! change in the collection).

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::dea::Panel;
use crate::error::{Error, Result};

pub const COLUMNS: [&str; 13] = [
    "id",
    "name",
    "expenditures_2016",
    "expenditures_2017",
    "employees_2017",
    "collection_2016",
    "collection_2017",
    "registrations_2017",
    "circulation_2017",
    "event_attendance_2017",
    "population",
    "density",
    "town_distance",
];

pub const INPUT_LABELS: [&str; 3] = ["total_expenditures", "employees", "collection"];
pub const OUTPUT_LABELS: [&str; 4] = ["registrations", "circulation", "event_attendance", "collection_additions"];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LibraryRecord {
    pub id: String,
    pub name: String,
    pub expenditures_2016: Option<f64>,
    pub expenditures_2017: Option<f64>,
    pub employees_2017: Option<f64>,
    pub collection_2016: Option<f64>,
    pub collection_2017: Option<f64>,
    pub registrations_2017: Option<f64>,
    pub circulation_2017: Option<f64>,
    pub event_attendance_2017: Option<f64>,
    pub population: Option<f64>,
    pub density: Option<f64>,
    pub town_distance: Option<f64>,
}

impl LibraryRecord {
    /// Numeric fields paired with their column names, in column order.
    pub fn numeric_fields(&self) -> [(&'static str, Option<f64>); 11] {
        [
            ("expenditures_2016", self.expenditures_2016),
            ("expenditures_2017", self.expenditures_2017),
            ("employees_2017", self.employees_2017),
            ("collection_2016", self.collection_2016),
            ("collection_2017", self.collection_2017),
            ("registrations_2017", self.registrations_2017),
            ("circulation_2017", self.circulation_2017),
            ("event_attendance_2017", self.event_attendance_2017),
            ("population", self.population),
            ("density", self.density),
            ("town_distance", self.town_distance),
        ]
    }

    fn field_mut(&mut self, column: &str) -> Option<&mut Option<f64>> {
        Some(match column {
            "expenditures_2016" => &mut self.expenditures_2016,
            "expenditures_2017" => &mut self.expenditures_2017,
            "employees_2017" => &mut self.employees_2017,
            "collection_2016" => &mut self.collection_2016,
            "collection_2017" => &mut self.collection_2017,
            "registrations_2017" => &mut self.registrations_2017,
            "circulation_2017" => &mut self.circulation_2017,
            "event_attendance_2017" => &mut self.event_attendance_2017,
            "population" => &mut self.population,
            "density" => &mut self.density,
            "town_distance" => &mut self.town_distance,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LoadedRecords {
    pub records: Vec<LibraryRecord>,
    /// One line per cell that was present but unusable.
    pub warnings: Vec<String>,
}

pub fn load_records(path: impl AsRef<Path>) -> Result<LoadedRecords> {
    read_records(File::open(path)?)
}

pub fn read_records<R: Read>(reader: R) -> Result<LoadedRecords> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut index = Vec::with_capacity(COLUMNS.len());
    for col in COLUMNS {
        let pos = headers
            .iter()
            .position(|h| h == col)
            .ok_or_else(|| Error::MissingColumn(col.to_string()))?;
        index.push(pos);
    }

    let mut out = LoadedRecords::default();
    for (row, result) in rdr.records().enumerate() {
        let rec = result?;
        let line = row + 2;
        let cell = |k: usize| rec.get(index[k]).unwrap_or("");
        let mut r = LibraryRecord {
            id: cell(0).to_string(),
            name: cell(1).to_string(),
            ..Default::default()
        };
        if r.id.is_empty() {
            r.id = format!("row{}", line);
            out.warnings.push(format!("line {}: empty id, using {}", line, r.id));
        }
        for (k, &col) in COLUMNS.iter().enumerate().skip(2) {
            let raw = cell(k);
            if raw.is_empty() {
                continue;
            }
            let value = match raw.parse::<f64>() {
                Ok(v) if v.is_finite() && v >= 0.0 => Some(v),
                Ok(v) => {
                    out.warnings
                        .push(format!("line {}: {} = {} is not a finite non-negative number; marked missing", line, col, v));
                    None
                }
                Err(_) => {
                    out.warnings
                        .push(format!("line {}: {} = {:?} is not numeric; marked missing", line, col, raw));
                    None
                }
            };
            *r.field_mut(col).expect("numeric column") = value;
        }
        out.records.push(r);
    }
    Ok(out)
}

pub fn write_records<W: Write>(records: &[LibraryRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(COLUMNS)?;
    for r in records {
        let mut row = vec![r.id.clone(), r.name.clone()];
        row.extend(
            r.numeric_fields()
                .iter()
                .map(|(_, v)| v.map(|x| x.to_string()).unwrap_or_default()),
        );
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Population, density and travel distance per panel unit.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Environment {
    pub population: Vec<f64>,
    pub density: Vec<f64>,
    pub distance: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DropEntry {
    pub id: String,
    pub reasons: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    pub panel: Panel,
    pub environment: Environment,
    pub drops: Vec<DropEntry>,
}

/// Builds the panel. Records with a missing field, or a population not above
/// 1 (the environmental regression uses `1 / ln p`), are dropped and logged.
pub fn preprocess(records: &[LibraryRecord]) -> Result<Prepared> {
    if records.is_empty() {
        return Err(Error::Input("no records".into()));
    }
    let mut ids = Vec::new();
    let mut inputs = Vec::new();
    let mut outputs = Vec::new();
    let mut env = Environment::default();
    let mut drops = Vec::new();

    for r in records {
        let mut reasons: Vec<String> = r
            .numeric_fields()
            .iter()
            .filter(|(_, v)| v.is_none())
            .map(|(name, _)| format!("missing: {}", name))
            .collect();
        if let Some(p) = r.population {
            if p <= 1.0 {
                reasons.push(format!("population {} does not exceed 1", p));
            }
        }
        if !reasons.is_empty() {
            drops.push(DropEntry {
                id: r.id.clone(),
                reasons,
            });
            continue;
        }
        let v = |x: Option<f64>| x.expect("checked above");
        let c16 = v(r.collection_2016);
        let c17 = v(r.collection_2017);
        ids.push(r.id.clone());
        inputs.push(vec![
            v(r.expenditures_2016) + v(r.expenditures_2017),
            v(r.employees_2017),
            c16,
        ]);
        outputs.push(vec![
            v(r.registrations_2017),
            v(r.circulation_2017),
            v(r.event_attendance_2017),
            (c17 - c16).max(0.0),
        ]);
        env.population.push(v(r.population));
        env.density.push(v(r.density));
        env.distance.push(v(r.town_distance));
    }

    if ids.is_empty() {
        return Err(Error::Input(format!(
            "all {} records were dropped for missing or invalid data",
            records.len()
        )));
    }
    Ok(Prepared {
        panel: Panel::new(ids, inputs, outputs)?,
        environment: env,
        drops,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "id,name,expenditures_2016,expenditures_2017,employees_2017,collection_2016,collection_2017,registrations_2017,circulation_2017,event_attendance_2017,population,density,town_distance";

    fn complete(id: &str) -> LibraryRecord {
        LibraryRecord {
            id: id.into(),
            name: format!("Library {}", id),
            expenditures_2016: Some(10.0),
            expenditures_2017: Some(20.0),
            employees_2017: Some(0.5),
            collection_2016: Some(100.0),
            collection_2017: Some(90.0),
            registrations_2017: Some(12.0),
            circulation_2017: Some(300.0),
            event_attendance_2017: Some(0.0),
            population: Some(250.0),
            density: Some(0.4),
            town_distance: Some(12.5),
        }
    }

    #[test]
    fn reads_three_rows() {
        let csv = format!(
            "{HEADER}\n1,A,1,2,0,10,12,3,40,0,100,0.5,10\n2,B,1,2,,10,12,3,40,0,100,0.5,10\n3,C,1,2,1,10,12,3,40,0,100,0.5,0\n"
        );
        let loaded = read_records(csv.as_bytes()).unwrap();
        assert_eq!(loaded.records.len(), 3);
        assert_eq!(loaded.records[1].employees_2017, None);
        assert_eq!(loaded.records[0].employees_2017, Some(0.0));
        assert!(loaded.warnings.is_empty());
    }

    #[test]
    fn missing_column_is_schema_error() {
        let header = HEADER.replace(",population", "");
        let csv = format!("{header}\n");
        match read_records(csv.as_bytes()) {
            Err(Error::MissingColumn(c)) => assert_eq!(c, "population"),
            other => panic!("{:?}", other),
        }
    }

    #[test]
    fn bad_cells_become_missing_with_warning() {
        let csv = format!("{HEADER},extra\n1,A,abc,2,0,10,12,3,40,-5,100,0.5,10,zzz\n");
        let loaded = read_records(csv.as_bytes()).unwrap();
        assert_eq!(loaded.records[0].expenditures_2016, None);
        assert_eq!(loaded.records[0].event_attendance_2017, None);
        assert_eq!(loaded.warnings.len(), 2);
    }

    #[test]
    fn variable_construction() {
        let prepared = preprocess(&[complete("a")]).unwrap();
        assert_eq!(prepared.panel.inputs(0), &[30.0, 0.5, 100.0]);
        assert_eq!(prepared.panel.outputs(0), &[12.0, 300.0, 0.0, 0.0]);
        let mut grown = complete("b");
        grown.collection_2017 = Some(130.0);
        let prepared = preprocess(&[grown]).unwrap();
        assert_eq!(prepared.panel.outputs(0)[3], 30.0);
        assert_eq!(prepared.environment.distance, vec![12.5]);
    }

    #[test]
    fn incomplete_records_are_dropped_and_logged() {
        let mut gap = complete("b");
        gap.circulation_2017 = None;
        let mut tiny = complete("c");
        tiny.population = Some(1.0);
        let prepared = preprocess(&[complete("a"), gap, tiny]).unwrap();
        assert_eq!(prepared.panel.len(), 1);
        assert_eq!(prepared.drops.len(), 2);
        assert_eq!(prepared.drops[0].reasons, vec!["missing: circulation_2017"]);
        assert_eq!(prepared.panel.len() + prepared.drops.len(), 3);
    }

    #[test]
    fn nothing_usable_is_fatal() {
        let mut gap = complete("a");
        gap.population = None;
        assert!(preprocess(&[gap]).is_err());
        assert!(preprocess(&[]).is_err());
    }

    #[test]
    fn write_then_read() {
        let mut b = complete("b");
        b.density = None;
        let records = vec![complete("a"), b];
        let mut buf = Vec::new();
        write_records(&records, &mut buf).unwrap();
        assert_eq!(read_records(buf.as_slice()).unwrap().records, records);
    }
}
