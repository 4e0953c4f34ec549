"""Multi-query PRM* planning with landmark-guided A*."""

from .env import (Box, Circle, ClutterSpec, Environment, Rect, calibrate_intensity,
                  clear_probability, point_free, poisson_forest, sample_free, segment_clear)
from .landmarks import (LandmarkTable, build_landmark_table, heuristic_quality,
                        landmark_heuristic, select_landmarks, sssp)
from .roadmap import (LENGTH, WORK, CostObjective, RoadmapGraph, build_prm, connection_radius,
                      nearest_vertex, radius_neighbors)
from .search import SearchResult, astar, dijkstra, euclidean_heuristic, path_to_root

__version__ = "0.1.0"
