from modules.paths.brownian import (
    TimeGrid,
    SamplePath,
    VectorPath,
    SeedSpec,
    uniform_grid,
    brownian_increments,
    generate_brownian,
    generate_brownian_vector,
    refine_bridge,
    dyadic_refinements,
    write_path_csv,
)
