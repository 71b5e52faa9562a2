use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

/// Comment lines written at the top of every output file.
#[derive(Clone, Debug)]
pub struct Audit {
    flags: String,
}

impl Audit {
    /// `args` is the effective argument list after config merging, without
    /// the program name. `--threads` is dropped since it cannot change results.
    pub fn new(args: &[String]) -> Audit {
        let mut kept = Vec::new();
        let mut skip = false;
        for a in args {
            if skip {
                skip = false;
            } else if a == "--threads" {
                skip = true;
            } else if !a.starts_with("--threads=") {
                kept.push(a.as_str());
            }
        }
        Audit { flags: kept.join(" ") }
    }

    pub fn lines(&self, seed: Option<u64>) -> Vec<String> {
        let mut out = vec![
            format!("rpens {}", env!("CARGO_PKG_VERSION")),
            format!("flags: {}", self.flags),
        ];
        if let Some(s) = seed {
            out.push(format!("seed: {s}"));
        }
        out
    }

    /// Creates `path` and writes the header comments into it.
    pub fn create(&self, path: &Path, seed: Option<u64>) -> std::io::Result<BufWriter<File>> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_header(&mut w, seed)?;
        Ok(w)
    }

    pub fn write_header<W: Write>(&self, w: &mut W, seed: Option<u64>) -> std::io::Result<()> {
        for line in self.lines(seed) {
            writeln!(w, "# {line}")?;
        }
        Ok(())
    }
}
