use std::path::Path;

use anyhow::{bail, Context, Result};
use ofl_core::Profile;

/// Reads a one-column CSV of agent locations. A non-numeric first row is
/// treated as a header.
pub fn read_profile_file(path: &Path) -> Result<Vec<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let mut values = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.with_context(|| format!("reading {}", path.display()))?;
        let Some(field) = record.get(0).filter(|f| !f.is_empty()) else {
            continue;
        };
        if record.len() > 1 && record.iter().skip(1).any(|f| !f.is_empty()) {
            bail!("{}:{}: expected one column", path.display(), i + 1);
        }
        match field.parse::<f64>() {
            Ok(v) => values.push(v),
            Err(_) if i == 0 => continue,
            Err(_) => bail!("{}:{}: `{field}` is not a number", path.display(), i + 1),
        }
    }
    Ok(values)
}

pub fn load_profile(inline: Option<&[f64]>, file: Option<&Path>) -> Result<Profile> {
    let raw = match (inline, file) {
        (Some(v), None) => v.to_vec(),
        (None, Some(path)) => read_profile_file(path)?,
        (Some(_), Some(_)) => bail!("give either --profile or --profile-file, not both"),
        (None, None) => bail!("a profile is required (--profile or --profile-file)"),
    };
    Ok(Profile::new(raw)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn reads_with_and_without_header() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "x\n0.25\n\n0.75").unwrap();
        assert_eq!(read_profile_file(f.path()).unwrap(), vec![0.25, 0.75]);

        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "0.1\n0.2").unwrap();
        assert_eq!(read_profile_file(f.path()).unwrap(), vec![0.1, 0.2]);
    }

    #[test]
    fn rejects_garbage() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "0.1\nabc").unwrap();
        assert!(read_profile_file(f.path()).is_err());

        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "0.1,0.2").unwrap();
        assert!(read_profile_file(f.path()).is_err());
    }

    #[test]
    fn exactly_one_source() {
        assert!(load_profile(None, None).is_err());
        assert!(load_profile(Some(&[0.5]), Some(Path::new("x.csv"))).is_err());
        assert_eq!(load_profile(Some(&[0.7, 0.2]), None).unwrap().locations(), &[0.2, 0.7]);
    }
}
