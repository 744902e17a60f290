from metagen import *

def make_structure() -> Structure:
    v0 = vertex(cuboid.corners.FRONT_BOTTOM_LEFT)
    v1 = vertex(cuboid.corners.FRONT_BOTTOM_RIGHT)
    p0 = Polyline([v0, v1])
    skel = skeleton([p0])
    # a capsule this wide swallows the whole cell
    beams = UniformBeams(skel, 3.0)
    embedding = cuboid.embed(1.0, 1.0, 1.0, cornerAtAABBMin=cuboid.corners.FRONT_BOTTOM_LEFT)
    tile = Tile([beams], embedding)
    obj = Structure(tile, Identity())
    return obj
