use hedonic::families::coupled_pair;
use hedonic::surplus::{check_structure, StructureSampler};

fn main() {
    let pp = coupled_pair(2, 0.4, 0.3);
    for r in check_structure(&pp, &StructureSampler::default()) {
        println!("{:<4} {:<13} {:<40} worst {:.4e}", r.condition.to_string(), r.verdict.to_string(), r.subject, r.worst_value);
    }
}
