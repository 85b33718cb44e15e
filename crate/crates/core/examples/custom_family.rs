//! A family given by expressions, loaded from TOML and screened.

use hedonic::commands::{exit_code, run_check};
use hedonic::config::RunConfig;

const CONFIG: &str = r#"
seed = 1

[family]
kind = "custom"
dim = 1
h = "x1*z1 - z1^2/2 - z1^4/12"
g = "y1*z1 + 0.1*y1^2*z1"
x_box = [[-0.4, 0.4]]
y_box = [[-0.4, 0.4]]
z_box = [[-2.0, 2.0]]

[check]
conditions = ["A0", "A1", "A2", "B3w"]

[check.probes]
pairs = 20
"#;

fn main() {
    let cfg = match RunConfig::from_toml_str(CONFIG) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(3);
        }
    };
    match run_check(&cfg) {
        Ok(b) => {
            for r in &b.reports {
                println!("{:<4} {:<13} {}", r.condition.to_string(), r.verdict.to_string(), r.subject);
            }
            println!("exit code would be {}", exit_code(&b));
        }
        Err(e) => eprintln!("{e}"),
    }
}
