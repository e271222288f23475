fn main() {
    let path = std::env::args().nth(1).unwrap();
    let text = std::fs::read_to_string(path).unwrap();
    let (sc, w) = chanlint::ingest::load_scenario(&text).unwrap();
    let a = chanlint::run_analysis(&sc, &Default::default()).unwrap();
    for x in w { println!("warn {x}"); }
    for x in &a.anomalies { println!("{:?} {:?} {}", x.kind, x.subjects, x.message); }
    for n in &a.notes { println!("note {} {}", n.pi, n.message); }
    println!("{:?}", a.stats);
}
