use super::ScenarioError;

/// Miles per disengagement of the long-run, industry-leading fleet.
pub const WAYMO_MILES_PER_DISENGAGEMENT: f64 = 11_154.3;
/// Miles per disengagement in a dense urban network.
pub const GM_CRUISE_MILES_PER_DISENGAGEMENT: f64 = 5_204.9;
/// Annual miles driven by one city taxi.
pub const TAXI_MILES_PER_VEHICLE_YEAR: f64 = 70_000.0;
/// Share of daily taxi miles driven in the PM shift.
pub const PM_SHIFT_FRACTION: f64 = 0.63;
/// Length of the PM shift in hours.
pub const PM_SHIFT_HOURS: f64 = 12.0;
/// Share of daily miles driven in the busiest hour.
pub const PEAK_HOUR_FRACTION: f64 = 0.061;
/// Day count used to turn annual miles into daily miles.
pub const DEFAULT_DAYS_PER_YEAR: f64 = 360.0;

/// Relative hourly demand weights for a synthetic weekday with morning and
/// evening peaks. Illustrative only: not a measured series.
pub const SYNTHETIC_HOURLY_WEIGHTS: [f64; 24] = [
    1.95, 1.45, 1.25, 1.15, 1.35, 2.25, 3.75, 5.55, 5.9, 5.65, 5.35, 5.45, 5.65, 5.75, 5.95, 6.0,
    6.1, 6.1, 5.9, 5.1, 4.0, 3.4, 2.8, 2.2,
];

/// `daily_miles` split across the hours by [`SYNTHETIC_HOURLY_WEIGHTS`].
pub fn synthetic_hourly_miles(daily_miles: f64) -> [f64; 24] {
    let total: f64 = SYNTHETIC_HOURLY_WEIGHTS.iter().sum();
    SYNTHETIC_HOURLY_WEIGHTS.map(|w| daily_miles * w / total)
}

/// Bundled metro table: `rank,metro,annual_miles_millions,vehicles_millions`
/// followed by reference ratios and utilizations for both criteria.
pub const METROS_CSV: &str = include_str!("../../data/metros.csv");

#[derive(Debug, Clone, PartialEq)]
pub struct Metro {
    pub rank: u32,
    pub name: String,
    pub annual_miles_millions: f64,
    pub vehicles_millions: f64,
    pub ref_c_p0: f64,
    pub ref_c_p1: f64,
    pub ref_util_p0: f64,
    pub ref_util_p1: f64,
}

const METRO_HEADER: [&str; 8] = [
    "rank",
    "metro",
    "annual_miles_millions",
    "vehicles_millions",
    "ref_c_p0",
    "ref_c_p1",
    "ref_util_p0",
    "ref_util_p1",
];

pub fn parse_metros(text: &str) -> Result<Vec<Metro>, ScenarioError> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header = reader.headers().map_err(ScenarioError::csv)?.clone();
    if header.iter().ne(METRO_HEADER) {
        return Err(ScenarioError::Data(format!(
            "metro header must be `{}`",
            METRO_HEADER.join(",")
        )));
    }
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(ScenarioError::csv)?;
        let row = i + 2;
        let num = |j: usize| -> Result<f64, ScenarioError> {
            record[j].trim().parse::<f64>().map_err(|_| {
                ScenarioError::Data(format!("row {row}: `{}` is not a number", &record[j]))
            })
        };
        out.push(Metro {
            rank: num(0)? as u32,
            name: record[1].to_string(),
            annual_miles_millions: num(2)?,
            vehicles_millions: num(3)?,
            ref_c_p0: num(4)?,
            ref_c_p1: num(5)?,
            ref_util_p0: num(6)?,
            ref_util_p1: num(7)?,
        });
    }
    Ok(out)
}

pub fn bundled_metros() -> Vec<Metro> {
    parse_metros(METROS_CSV).expect("bundled metro table is well formed")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_table_has_ten_ranked_rows() {
        let m = bundled_metros();
        assert_eq!(m.len(), 10);
        assert_eq!(m[0].name, "New York, NY");
        assert!(m.iter().enumerate().all(|(i, x)| x.rank as usize == i + 1));
        assert!(m
            .windows(2)
            .all(|w| w[0].annual_miles_millions >= w[1].annual_miles_millions));
        assert!(m
            .iter()
            .all(|x| x.ref_c_p1 >= x.ref_c_p0 && x.ref_util_p0 > x.ref_util_p1));
    }

    #[test]
    fn synthetic_profile_conserves_daily_miles() {
        let h = synthetic_hourly_miles(1000.0);
        assert!((h.iter().sum::<f64>() - 1000.0).abs() < 1e-9);
        let peak = h.iter().cloned().fold(0.0, f64::max) / 1000.0;
        assert!((peak - PEAK_HOUR_FRACTION).abs() < 1e-12);
    }

    #[test]
    fn malformed_metro_rows() {
        assert!(parse_metros("a,b\n1,2\n").is_err());
        let bad = format!("{}\n1,x,notanumber,1,1,1,1,1\n", METRO_HEADER.join(","));
        let err = parse_metros(&bad).unwrap_err();
        assert!(err.to_string().contains("row 2"), "{err}");
    }
}
