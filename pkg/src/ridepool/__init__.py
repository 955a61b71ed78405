"""Discrete-epoch ride-pooling simulation and decision library.

Joint request pricing (per-vehicle mean-field Q-learning over discrete
price factors) and vehicle-trip matching (post-decision value functions
feeding an exact central assignment), plus the experiment harness that
compares the policy combinations.
"""

from .assignment import (AssignmentProblem, AssignmentSolution, ScoredTrip,
                         brute_force_solve, solve)
from .demand import (CONSCIOUS_SENSITIVITY, PoissonDemand, ReplayDemand, Request,
                     SensitivityParams, Tariff, UBER_SENSITIVITY,
                     acceptance_probability, base_price, generate_requests,
                     load_requests, sample_acceptance)
from .matching import (MODE_EXPECTED, MODE_IMMEDIATE, MODE_NOMINAL, MatchObjective,
                       PostDecisionState, ValueFunction, post_decision_state,
                       score_trip, trip_revenue)
from .network import (RoadNetwork, grid_network, load_network, neighbors_within,
                      parse_network_file)
from .pricing import (DEFAULT_ACTION_FACTORS, FixedPricer, MeanFieldQTable,
                      ObservationEncoder, PlainQTable, PricingTransition,
                      candidate_price, load_pricer, mean_action)
from .sim import (EpochMetrics, POLICIES, SimConfig, World, run,
                  verify_service_log, write_metrics_csv)
from .trips import (Trip, Vehicle, feasible_insertion, generate_feasible_trips)

__version__ = "0.1.0"
