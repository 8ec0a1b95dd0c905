use std::time::Instant;
use stablewalk::convolution::{return_series, ConvolutionPlan};
use stablewalk::measures::build_mu_alpha;
use stablewalk::{GroupDescriptor, WordMetric};

fn main() {
    eprintln!("start");
    let g = GroupDescriptor::free_abelian(2);
    let metric = WordMetric::new(&g, 1 << 24).unwrap();
    eprintln!("metric done");
    let t0 = Instant::now();
    let mu: stablewalk::measures::SparseMeasure<f64> = build_mu_alpha(&metric, 1.0, 250).unwrap();
    eprintln!("measure built: {} atoms in {:.1}s", mu.len(), t0.elapsed().as_secs_f64());
    let plan = ConvolutionPlan {
        cert_budget: 0.6,
        max_support_size: 500_000,
        ..Default::default()
    };
    let t0 = Instant::now();
    let s = return_series(&mu, &[8, 16, 32, 64], &plan).unwrap();
    eprintln!("series in {:.1}s", t0.elapsed().as_secs_f64());
    for e in &s.entries {
        println!("2n={}: {:.4e} rel {:.2e}", e.time, e.value, e.relative_error());
    }
}
