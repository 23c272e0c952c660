//! Measurement vector dump: `index,kind,location,sigma,attackable,value,provenance`.

use std::fmt::Write;

use super::{MeasurementConfig, MeasurementSpec, MeasurementVector};
use crate::netcase::NetworkCase;
use crate::{Error, Result};

const HEADER: &str = "index,kind,location,sigma,attackable,value,provenance";

pub fn write_measurements(config: &MeasurementConfig, z: &MeasurementVector) -> String {
    let mut out = String::from(HEADER);
    out.push('\n');
    for (i, spec) in config.specs().iter().enumerate() {
        let _ = writeln!(
            out,
            "{i},{},{},{:.16e},{},{:.16e},{}",
            spec.kind,
            spec.location,
            spec.sigma,
            spec.attackable,
            z.values[i],
            z.provenance[i].code()
        );
    }
    out
}

pub fn read_measurements(
    case: &NetworkCase,
    text: &str,
) -> Result<(MeasurementConfig, MeasurementVector)> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim() == HEADER => {}
        _ => return Err(Error::parse(1, format!("expected header `{HEADER}`"))),
    }
    let mut specs = Vec::new();
    let mut values = Vec::new();
    let mut provenance = Vec::new();
    for (ln, line) in lines {
        let ln = ln + 1;
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 7 {
            return Err(Error::parse(
                ln,
                format!("expected 7 fields, found {}", f.len()),
            ));
        }
        let num = |name: &str, s: &str| {
            s.parse::<f64>().map_err(|_| {
                Error::parse(ln, format!("field `{name}`: `{s}` is not a valid number"))
            })
        };
        let index: usize = f[0].parse().map_err(|_| {
            Error::parse(ln, format!("field `index`: `{}` is not an integer", f[0]))
        })?;
        if index != specs.len() {
            return Err(Error::parse(ln, format!("index {index} out of sequence")));
        }
        let kind = f[1].parse().map_err(|e: String| Error::parse(ln, e))?;
        let location = f[2].parse().map_err(|e: String| Error::parse(ln, e))?;
        let sigma = num("sigma", f[3])?;
        let attackable = f[4].parse().map_err(|_| {
            Error::parse(ln, format!("field `attackable`: `{}` is not a bool", f[4]))
        })?;
        values.push(num("value", f[5])?);
        provenance.push(f[6].parse().map_err(|e: String| Error::parse(ln, e))?);
        specs.push(MeasurementSpec {
            kind,
            location,
            sigma,
            attackable,
        });
    }
    let config = MeasurementConfig::new(case, specs)?;
    Ok((config, MeasurementVector { values, provenance }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measmodel::{build_config, generate_measurements};
    use crate::netcase::bundled_ieee14_case;

    #[test]
    fn round_trip_is_exact() {
        let (case, op) = bundled_ieee14_case();
        let c = build_config(&case, 3).unwrap();
        let z = generate_measurements(&case, &c, &op.state, 11, 1.0);
        let text = write_measurements(&c, &z);
        let (c2, z2) = read_measurements(&case, &text).unwrap();
        assert_eq!(c, c2);
        assert_eq!(z, z2);
    }

    #[test]
    fn bad_location_is_reported_with_line() {
        let (case, _) = bundled_ieee14_case();
        let text = format!("{HEADER}\n0,V_MAG,bus:99,1e-3,true,1.0,noisy\n");
        let err = read_measurements(&case, &text).unwrap_err();
        assert!(err.to_string().contains("99"), "{err}");
    }
}
