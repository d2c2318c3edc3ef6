from .obstacles import (
    BOUNDARY_TOL,
    EggObstacle,
    EllipseModel,
    EllipseObstacle,
    Obstacle,
    Projection,
    SphereObstacle,
    boundary_curvature_radius,
    obstacle_gradient,
    obstacle_hessian_min_eigenvalue,
    obstacle_value,
    project_to_obstacle,
)
from .world import (
    QuadraticObjective,
    ValidationReport,
    WorkspaceSphere,
    World,
    beta_product,
    beta_product_gradient,
    product_with_gradient,
    sample_free_space,
    validate_world,
)
from .worldfile import dumps_world, load_world, loads_world, world_from_dict, world_to_dict

__all__ = [
    "BOUNDARY_TOL",
    "EggObstacle",
    "EllipseModel",
    "EllipseObstacle",
    "Obstacle",
    "Projection",
    "SphereObstacle",
    "boundary_curvature_radius",
    "obstacle_gradient",
    "obstacle_hessian_min_eigenvalue",
    "obstacle_value",
    "project_to_obstacle",
    "QuadraticObjective",
    "ValidationReport",
    "WorkspaceSphere",
    "World",
    "beta_product",
    "beta_product_gradient",
    "product_with_gradient",
    "sample_free_space",
    "validate_world",
    "dumps_world",
    "load_world",
    "loads_world",
    "world_from_dict",
    "world_to_dict",
]
