from metagen import *

def make_structure(beam_d=0.06) -> Structure:
    c0 = vertex(cuboid.corners.FRONT_BOTTOM_LEFT)
    c1 = vertex(cuboid.corners.FRONT_BOTTOM_RIGHT)
    c2 = vertex(cuboid.corners.FRONT_TOP_LEFT)
    c3 = vertex(cuboid.corners.FRONT_TOP_RIGHT)
    c4 = vertex(cuboid.corners.BACK_BOTTOM_LEFT)
    c5 = vertex(cuboid.corners.BACK_BOTTOM_RIGHT)
    c6 = vertex(cuboid.corners.BACK_TOP_LEFT)
    c7 = vertex(cuboid.corners.BACK_TOP_RIGHT)
    pairs = [[c0, c1], [c2, c3], [c4, c5], [c6, c7],
             [c0, c2], [c1, c3], [c4, c6], [c5, c7],
             [c0, c4], [c1, c5], [c2, c6], [c3, c7]]
    paths = []
    for pair in pairs:
        paths.append(Polyline(pair))
    skel = skeleton(paths)
    beams = UniformBeams(skel, beam_d)
    embedding = cuboid.embed(1.0, 1.0, 1.0, cornerAtAABBMin=cuboid.corners.FRONT_BOTTOM_LEFT)
    tile = Tile([beams], embedding)
    return Structure(tile, Identity())
