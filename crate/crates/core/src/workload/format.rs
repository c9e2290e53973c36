//! Whitespace-separated text formats for substrates and VNR streams.
//!
//! Lines starting with `#` and blank lines are ignored. Reals are written
//! with Rust's shortest round-trip formatting, so save followed by load
//! reproduces every value exactly.

use std::fmt::Display;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use super::{validate_stream, VirtualLink, VirtualNetworkRequest, WorkloadError};
use crate::substrate::{MultiDomainSubstrate, SubstrateNode};
use crate::NodeId;

struct Lines {
    items: Vec<(usize, Vec<String>)>,
    pos: usize,
}

impl Lines {
    fn read(reader: impl Read) -> Result<Self, WorkloadError> {
        let mut items = Vec::new();
        for (i, line) in BufReader::new(reader).lines().enumerate() {
            let line = line.map_err(|e| WorkloadError::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            items.push((i + 1, trimmed.split_whitespace().map(str::to_owned).collect()));
        }
        Ok(Self { items, pos: 0 })
    }

    fn last_line(&self) -> usize {
        self.items.last().map_or(0, |(l, _)| *l)
    }

    /// Next record with exactly `arity` fields.
    fn next(&mut self, arity: usize, what: &str) -> Result<(usize, Vec<String>), WorkloadError> {
        let Some((line, fields)) = self.items.get(self.pos).cloned() else {
            return Err(WorkloadError::Parse {
                line: self.last_line() + 1,
                message: format!("unexpected end of file, expected {what}"),
            });
        };
        self.pos += 1;
        if fields.len() != arity {
            return Err(WorkloadError::Parse {
                line,
                message: format!("{what}: expected {arity} fields, found {}", fields.len()),
            });
        }
        Ok((line, fields))
    }

    fn finish(&self) -> Result<(), WorkloadError> {
        match self.items.get(self.pos) {
            Some((line, _)) => Err(WorkloadError::Parse {
                line: *line,
                message: "trailing content".into(),
            }),
            None => Ok(()),
        }
    }
}

fn field<T: FromStr>(line: usize, raw: &str, name: &str) -> Result<T, WorkloadError>
where
    T::Err: Display,
{
    raw.parse().map_err(|e| WorkloadError::Parse {
        line,
        message: format!("{name} {raw:?}: {e}"),
    })
}

fn io_err(path: &Path, source: std::io::Error) -> WorkloadError {
    WorkloadError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn write_substrate(s: &MultiDomainSubstrate, mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "{} {} {}", s.num_nodes(), s.num_links(), s.num_domains())?;
    for n in s.nodes() {
        writeln!(
            w,
            "{} {} {} {} {}",
            n.id, n.domain, n.coord.0, n.coord.1, n.cpu_capacity
        )?;
    }
    for l in s.links() {
        writeln!(w, "{} {} {}", l.a, l.b, l.bw_capacity)?;
    }
    Ok(())
}

/// Parses a substrate; node lines may appear in any order but the ids must
/// cover `0..num_nodes`.
pub fn read_substrate(r: impl Read) -> Result<MultiDomainSubstrate, WorkloadError> {
    let mut lines = Lines::read(r)?;
    let (line, head) = lines.next(3, "header <num_nodes> <num_links> <num_domains>")?;
    let num_nodes: usize = field(line, &head[0], "num_nodes")?;
    let num_links: usize = field(line, &head[1], "num_links")?;
    let num_domains: usize = field(line, &head[2], "num_domains")?;

    let mut slots: Vec<Option<SubstrateNode>> = vec![None; num_nodes];
    for _ in 0..num_nodes {
        let (line, f) = lines.next(5, "node <id> <domain> <x> <y> <cpu>")?;
        let id: NodeId = field(line, &f[0], "node id")?;
        let domain = field(line, &f[1], "domain")?;
        let x = field(line, &f[2], "x")?;
        let y = field(line, &f[3], "y")?;
        let cpu = field(line, &f[4], "cpu")?;
        let slot = slots.get_mut(id).ok_or_else(|| {
            WorkloadError::Validation(format!("line {line}: node id {id} >= num_nodes {num_nodes}"))
        })?;
        if slot.is_some() {
            return Err(WorkloadError::Validation(format!(
                "line {line}: duplicate node id {id}"
            )));
        }
        *slot = Some(SubstrateNode::new(id, domain, (x, y), cpu));
    }
    let nodes: Vec<SubstrateNode> = slots.into_iter().map(Option::unwrap).collect();

    let mut links = Vec::with_capacity(num_links);
    for _ in 0..num_links {
        let (line, f) = lines.next(3, "link <a> <b> <bw>")?;
        links.push((
            field(line, &f[0], "endpoint")?,
            field(line, &f[1], "endpoint")?,
            field(line, &f[2], "bandwidth")?,
        ));
    }
    lines.finish()?;
    MultiDomainSubstrate::new(num_domains, nodes, &links)
        .map_err(|e| WorkloadError::Validation(e.to_string()))
}

pub fn save_substrate(s: &MultiDomainSubstrate, path: impl AsRef<Path>) -> Result<(), WorkloadError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    write_substrate(s, &mut w)
        .and_then(|_| w.flush())
        .map_err(|e| io_err(path, e))
}

pub fn load_substrate(path: impl AsRef<Path>) -> Result<MultiDomainSubstrate, WorkloadError> {
    let path = path.as_ref();
    read_substrate(File::open(path).map_err(|e| io_err(path, e))?)
}

pub fn write_vnrs(stream: &[VirtualNetworkRequest], mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "{}", stream.len())?;
    for v in stream {
        writeln!(
            w,
            "{} {} {} {} {}",
            v.id,
            v.t_s,
            v.t_e,
            v.num_nodes(),
            v.links.len()
        )?;
        for d in &v.node_demands {
            writeln!(w, "{d}")?;
        }
        for l in &v.links {
            writeln!(w, "{} {} {}", l.a, l.b, l.bw_demand)?;
        }
    }
    Ok(())
}

pub fn read_vnrs(r: impl Read) -> Result<Vec<VirtualNetworkRequest>, WorkloadError> {
    let mut lines = Lines::read(r)?;
    let (line, head) = lines.next(1, "header <vnr_count>")?;
    let count: usize = field(line, &head[0], "vnr_count")?;
    let mut stream = Vec::with_capacity(count);
    for _ in 0..count {
        let (line, h) = lines.next(5, "vnr header <id> <t_s> <t_e> <num_vnodes> <num_vlinks>")?;
        let id = field(line, &h[0], "vnr id")?;
        let t_s = field(line, &h[1], "t_s")?;
        let t_e = field(line, &h[2], "t_e")?;
        let n: usize = field(line, &h[3], "num_vnodes")?;
        let m: usize = field(line, &h[4], "num_vlinks")?;
        let mut node_demands = Vec::with_capacity(n);
        for _ in 0..n {
            let (line, f) = lines.next(1, "cpu demand")?;
            node_demands.push(field(line, &f[0], "cpu demand")?);
        }
        let mut links = Vec::with_capacity(m);
        for _ in 0..m {
            let (line, f) = lines.next(3, "virtual link <a> <b> <bw>")?;
            links.push(VirtualLink {
                a: field(line, &f[0], "endpoint")?,
                b: field(line, &f[1], "endpoint")?,
                bw_demand: field(line, &f[2], "bandwidth")?,
            });
        }
        stream.push(VirtualNetworkRequest {
            id,
            node_demands,
            links,
            t_s,
            t_e,
        });
    }
    lines.finish()?;
    validate_stream(&stream)?;
    Ok(stream)
}

pub fn save_vnrs(stream: &[VirtualNetworkRequest], path: impl AsRef<Path>) -> Result<(), WorkloadError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    write_vnrs(stream, &mut w)
        .and_then(|_| w.flush())
        .map_err(|e| io_err(path, e))
}

pub fn load_vnrs(path: impl AsRef<Path>) -> Result<Vec<VirtualNetworkRequest>, WorkloadError> {
    let path = path.as_ref();
    read_vnrs(File::open(path).map_err(|e| io_err(path, e))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workload::{generate_substrate, generate_vnr_stream, SubstrateConfig, VnrConfig};

    #[test]
    fn substrate_round_trip() {
        let s = generate_substrate(&SubstrateConfig::default(), 2).unwrap();
        let mut buf = Vec::new();
        write_substrate(&s, &mut buf).unwrap();
        let back = read_substrate(buf.as_slice()).unwrap();
        assert_eq!(back, s);
        let mut again = Vec::new();
        write_substrate(&back, &mut again).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn vnr_round_trip() {
        let cfg = VnrConfig {
            count: 50,
            ..VnrConfig::default()
        };
        let stream = generate_vnr_stream(&cfg, 9);
        let mut buf = Vec::new();
        write_vnrs(&stream, &mut buf).unwrap();
        assert_eq!(read_vnrs(buf.as_slice()).unwrap(), stream);
    }

    #[test]
    fn comments_and_blank_lines_are_skipped() {
        let text = "# tiny\n2 1 1\n\n0 0 0 0 10\n# node one\n1 0 3 4 20\n0 1 5\n";
        let s = read_substrate(text.as_bytes()).unwrap();
        assert_eq!(s.num_nodes(), 2);
        assert_eq!(s.link(0).unwrap().bw_capacity, 5.0);
    }

    #[test]
    fn errors_name_line_or_invariant() {
        let bad_number = "2 1 1\n0 0 0 0 10\n1 0 x 4 20\n0 1 5\n";
        match read_substrate(bad_number.as_bytes()) {
            Err(WorkloadError::Parse { line: 3, .. }) => {}
            other => panic!("{other:?}"),
        }
        let dangling = "2 1 1\n0 0 0 0 10\n1 0 3 4 20\n0 7 5\n";
        let err = read_substrate(dangling.as_bytes()).unwrap_err();
        assert!(matches!(err, WorkloadError::Validation(_)));
        assert!(err.to_string().contains("dangling"), "{err}");

        let backwards = "1\n0 5 5 2 1\n3\n4\n0 1 2\n";
        let err = read_vnrs(backwards.as_bytes()).unwrap_err();
        assert!(matches!(err, WorkloadError::Validation(_)), "{err}");

        let truncated = "1\n0 1 5 2 1\n3\n";
        assert!(matches!(
            read_vnrs(truncated.as_bytes()),
            Err(WorkloadError::Parse { .. })
        ));
        assert_eq!(read_vnrs("0\n".as_bytes()).unwrap(), vec![]);
    }
}
