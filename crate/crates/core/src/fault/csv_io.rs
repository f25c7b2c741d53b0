use super::{FaultDescriptor, FaultError, FaultId, FaultKind, FaultLocation};
use crate::netlist::{NodeKind, RtlGraph};

const HEADER: [&str; 7] = ["fid", "location_kind", "location_name", "bit", "kind", "start", "end"];

/// Parse `fid,location_kind,location_name,bit,kind[,start,end]` rows. A
/// header row is optional.
pub fn parse_fault_csv(text: &str, graph: &RtlGraph) -> Result<Vec<FaultDescriptor>, FaultError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut faults = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| FaultError::Csv {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            msg: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let err = |msg: String| FaultError::Csv { line, msg };
        if record.get(0) == Some("fid") {
            continue;
        }
        if record.len() != 5 && record.len() != 7 {
            return Err(err(format!("expected 5 or 7 fields, got {}", record.len())));
        }
        let fid: u32 = record[0].parse().map_err(|_| err(format!("bad fid `{}`", &record[0])))?;
        let name = &record[2];
        let location = match &record[1] {
            "wire" => FaultLocation::Wire(graph.lookup(name).ok_or_else(|| err(format!("unknown wire `{name}`")))?),
            "reg" => {
                let id = graph.lookup(name).ok_or_else(|| err(format!("unknown reg `{name}`")))?;
                if !matches!(graph.node(id).kind, NodeKind::Reg { .. }) {
                    return Err(err(format!("`{name}` is not a register")));
                }
                FaultLocation::Reg(id)
            }
            "port" => FaultLocation::Port(name.to_string()),
            other => return Err(err(format!("bad location kind `{other}`"))),
        };
        let bit: u32 = record[3].parse().map_err(|_| err(format!("bad bit `{}`", &record[3])))?;
        let kind = match (&record[4], record.get(5).filter(|s| !s.is_empty()), record.get(6).filter(|s| !s.is_empty())) {
            ("transient", Some(s), Some(e)) => format!("transient:{s}:{e}").parse::<FaultKind>(),
            ("transient", _, _) => return Err(err("transient fault needs start and end".into())),
            (k, None, None) => k.parse::<FaultKind>(),
            (k, _, _) => return Err(err(format!("`{k}` takes no window"))),
        }
        .map_err(|e| err(e.to_string()))?;
        faults.push(FaultDescriptor { fid: FaultId(fid), location, bit, kind });
    }
    Ok(faults)
}

pub fn write_fault_csv(faults: &[FaultDescriptor], graph: &RtlGraph) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(HEADER).expect("in-memory write");
    for f in faults {
        let (kind, start, end) = match f.kind {
            FaultKind::Transient { start, end } => ("transient".to_string(), start.to_string(), end.to_string()),
            k => (k.to_string(), String::new(), String::new()),
        };
        w.write_record([
            f.fid.0.to_string(),
            f.location.kind_str().to_string(),
            f.location.name(graph).to_string(),
            f.bit.to_string(),
            kind,
            start,
            end,
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::load_netlist;

    #[test]
    fn parse_and_echo() {
        let g = load_netlist("input a 2\nassign y 2 = NOT a\nreg r 2 = 0\nnext r = y").unwrap();
        let text = "fid,location_kind,location_name,bit,kind,start,end\n\
                    0,wire,y,1,sa0,,\n\
                    1,reg,r,0,transient,2,4\n\
                    2,port,a,1,sa1\n";
        let faults = parse_fault_csv(text, &g).unwrap();
        assert_eq!(faults.len(), 3);
        assert_eq!(faults[1].kind, FaultKind::Transient { start: 2, end: 4 });
        assert_eq!(faults[2].location, FaultLocation::Port("a".into()));
        let echoed = write_fault_csv(&faults, &g);
        assert_eq!(parse_fault_csv(&echoed, &g).unwrap(), faults);
    }

    #[test]
    fn rejects_bad_rows() {
        let g = load_netlist("input a 2\nassign y 2 = NOT a").unwrap();
        assert!(parse_fault_csv("0,wire,zz,0,sa0", &g).is_err());
        assert!(parse_fault_csv("0,reg,y,0,sa0", &g).is_err());
        assert!(parse_fault_csv("0,wire,y,0,transient", &g).is_err());
        assert!(parse_fault_csv("0,wire,y,0,sa0,1,2", &g).is_err());
        assert!(parse_fault_csv("x,wire,y,0,sa0", &g).is_err());
        assert!(parse_fault_csv("0,bus,y,0,sa0", &g).is_err());
    }
}
